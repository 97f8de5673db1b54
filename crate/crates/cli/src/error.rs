use serde::Serialize;

/// Failure of a CLI invocation, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent configuration.
    Config(String),
    /// A core guard rejected the configuration before any compute.
    Invalid(qfluid::Error),
    /// The configuration describes no work.
    EmptyPlan(String),
    /// A numerical guard fired mid-run.
    Numerical(qfluid::Error),
    /// Some sweep points or bench items failed; the rest were written.
    Partial { failed: usize, total: usize },
    Io(std::io::Error),
}

/// Machine-readable error record (`error.json`, stderr).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub error: String,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn from_config(e: qfluid::Error) -> Self {
        CliError::Invalid(e)
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) | CliError::EmptyPlan(_) => 2,
            CliError::Numerical(_) | CliError::Partial { .. } => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> String {
        match self {
            CliError::Config(_) => "ConfigError".into(),
            CliError::Invalid(e) | CliError::Numerical(e) => e.kind().into(),
            CliError::EmptyPlan(_) => "EmptyPlan".into(),
            CliError::Partial { .. } => "PartialFailure".into(),
            CliError::Io(_) => "Io".into(),
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Invalid(e) => write!(f, "config rejected: {e}"),
            CliError::EmptyPlan(m) => write!(f, "empty plan: {m}"),
            CliError::Numerical(e) => write!(f, "numerical guard: {e}"),
            CliError::Partial { failed, total } => write!(f, "{failed} of {total} items failed"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

/// Errors raised while computing: guards become exit code 3.
pub fn runtime(e: qfluid::Error) -> CliError {
    match e {
        qfluid::Error::Io(io) => CliError::Io(io),
        other => CliError::Numerical(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::EmptyPlan("x".into()).exit_code(), 2);
        assert_eq!(runtime(qfluid::Error::PhaseResolution { phase: 4.0 }).exit_code(), 3);
        assert_eq!(CliError::Partial { failed: 1, total: 2 }.exit_code(), 3);
        let r = CliError::EmptyPlan("no seeds".into()).record();
        assert_eq!(r.error, "EmptyPlan");
    }
}
