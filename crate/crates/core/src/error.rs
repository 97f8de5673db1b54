use thiserror::Error;

/// Errors raised by the numerical kernels.
///
/// Guard variants (`CflViolation`, `PhaseResolution`, `ResolutionGuard`, ...)
/// signal that the requested computation would silently lose accuracy; the
/// caller is expected to change the discretization rather than retry.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: dimension {dim}, points per axis {n} (need d in {{2,3}}, even n >= 8)")]
    InvalidGrid { dim: usize, n: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("source is not mean-zero: mean {mean:e} exceeds tolerance {tolerance:e}")]
    NonZeroMean { mean: f64, tolerance: f64 },

    #[error("density mean {mean} differs from 1")]
    MeanNotOne { mean: f64 },

    #[error("kernel evaluated at periodic distance {distance:e} from the origin")]
    OriginEvaluation { distance: f64 },

    #[error("CFL number {courant:.3} exceeds 0.5")]
    CflViolation { courant: f64 },

    #[error("velocity field is not divergence free (max |div u| = {max_divergence:e})")]
    NotDivergenceFree { max_divergence: f64 },

    #[error("potential phase increment {phase:.3} exceeds pi; reduce dt")]
    PhaseResolution { phase: f64 },

    #[error("grid does not resolve the semiclassical scales: {0}")]
    ResolutionGuard(String),

    #[error("density is negative (min {min:e})")]
    NegativeDensity { min: f64 },

    #[error("flow history is empty or does not cover [0, t]")]
    EmptyHistory,

    #[error("dimension {0} is not supported by this operation")]
    UnsupportedDimension(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that a numerical guard raised during a computation,
    /// as opposed to malformed input.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::NonZeroMean { .. }
                | Error::MeanNotOne { .. }
                | Error::OriginEvaluation { .. }
                | Error::CflViolation { .. }
                | Error::NotDivergenceFree { .. }
                | Error::PhaseResolution { .. }
                | Error::ResolutionGuard(_)
                | Error::NegativeDensity { .. }
        )
    }

    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid { .. } => "InvalidGrid",
            Error::GridMismatch => "GridMismatch",
            Error::NonZeroMean { .. } => "NonZeroMean",
            Error::MeanNotOne { .. } => "MeanNotOne",
            Error::OriginEvaluation { .. } => "OriginEvaluation",
            Error::CflViolation { .. } => "CflViolation",
            Error::NotDivergenceFree { .. } => "NotDivergenceFree",
            Error::PhaseResolution { .. } => "PhaseResolution",
            Error::ResolutionGuard(_) => "ResolutionGuard",
            Error::NegativeDensity { .. } => "NegativeDensity",
            Error::EmptyHistory => "EmptyHistory",
            Error::UnsupportedDimension(_) => "UnsupportedDimension",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Format(_) => "Format",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
