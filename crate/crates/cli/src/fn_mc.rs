use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use qfluid::coulomb::uniform_density;
use qfluid::modulated::{fn_expectation_closed_form, fn_expectation_monte_carlo, MonteCarloEstimate};
use qfluid::ScalarField;
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, FN_MC_JSON};
use crate::config::{DensitySpec, Experiment, RunConfig};
use crate::error::{runtime, CliError};

/// Fewest samples accepted for a Monte Carlo estimate.
pub const MIN_SAMPLES: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityResult {
    pub density: DensitySpec,
    pub closed_form: f64,
    pub estimate: MonteCarloEstimate,
    /// `(mean - closed_form) / std_error`.
    pub z: f64,
    pub doubled: Option<MonteCarloEstimate>,
    /// `std_error(S) / std_error(2S)`.
    pub std_error_ratio: Option<f64>,
}

/// `fn_mc.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSummary {
    pub run_id: String,
    pub seed: u64,
    pub d: usize,
    pub n: usize,
    pub n_points: usize,
    pub samples: usize,
    pub results: Vec<DensityResult>,
}

fn density(grid: qfluid::GridSpec, spec: &DensitySpec) -> ScalarField {
    let k = spec.mode;
    ScalarField::from_fn(grid, |x| {
        1.0 + spec.amplitude * (2.0 * PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2])).cos()
    })
}

/// `fn-mc`: Monte Carlo estimates of `E[F_N]` against the closed form, with
/// `mu ≡ 1` and `ρ = 1 + a cos(2πk·x)`.
pub fn run_fn_mc(config: &RunConfig, out: &Path, seed: u64) -> Result<McSummary, CliError> {
    config.check_experiment(Experiment::FnMc)?;
    let mc = config.mc.clone().ok_or_else(|| CliError::Config("missing [mc] section".into()))?;
    if mc.densities.is_empty() {
        return Err(CliError::EmptyPlan("no densities".into()));
    }
    if mc.samples < MIN_SAMPLES {
        return Err(CliError::Config(format!("samples must be >= {MIN_SAMPLES}")));
    }
    if mc.n_points < 2 {
        return Err(CliError::Config("n_points must be >= 2".into()));
    }
    let grid = config.grid_spec()?;
    let mu = uniform_density(grid);
    let mut fields = Vec::new();
    for spec in &mc.densities {
        if spec.mode[grid.dim()..].iter().any(|&k| k != 0) {
            return Err(CliError::Config(format!("density mode {:?} exceeds d = {}", spec.mode, grid.dim())));
        }
        if spec.mode.iter().all(|&k| k == 0) || spec.mode.iter().any(|&k| 2 * k.abs() >= grid.n() as i64) {
            return Err(CliError::Config(format!("density mode {:?} must be nonzero and below Nyquist", spec.mode)));
        }
        if !(spec.amplitude.abs() < 1.0) {
            return Err(CliError::Config("density amplitude must lie in (-1, 1)".into()));
        }
        fields.push(density(grid, spec));
    }

    let clock = Instant::now();
    let mut results = Vec::new();
    for (spec, rho) in mc.densities.iter().zip(&fields) {
        let closed_form = fn_expectation_closed_form(rho, &mu, mc.n_points).map_err(runtime)?;
        let estimate = fn_expectation_monte_carlo(rho, &mu, mc.n_points, mc.samples, seed).map_err(runtime)?;
        let doubled = if mc.check_doubling {
            Some(fn_expectation_monte_carlo(rho, &mu, mc.n_points, 2 * mc.samples, seed).map_err(runtime)?)
        } else {
            None
        };
        results.push(DensityResult {
            density: *spec,
            closed_form,
            estimate,
            z: (estimate.mean - closed_form) / estimate.std_error,
            doubled,
            std_error_ratio: doubled.map(|d| estimate.std_error / d.std_error),
        });
    }
    let summary = McSummary {
        run_id: artifacts::run_id(Experiment::FnMc, config, seed),
        seed,
        d: grid.dim(),
        n: grid.n(),
        n_points: mc.n_points,
        samples: mc.samples,
        results,
    };
    std::fs::create_dir_all(out)?;
    artifacts::write_json(&out.join(FN_MC_JSON), &summary)?;
    artifacts::write_timing(out, clock.elapsed().as_secs_f64())?;
    Ok(summary)
}
