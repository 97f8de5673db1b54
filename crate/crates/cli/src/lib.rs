//! Batch experiment runner for the `qfluid` solvers.
//!
//! Every subcommand reads one TOML configuration, validates all guards
//! before touching the output directory, and writes deterministic CSV/JSON
//! artifacts whose schemas live in `schemas/`.

pub mod artifacts;
pub mod bench;
pub mod config;
pub mod error;
pub mod euler_test;
pub mod fn_mc;
pub mod run;
pub mod sweep;

use std::path::{Path, PathBuf};

pub use config::{Experiment, RunConfig};
pub use error::CliError;

/// Arguments shared by all subcommands.
#[derive(Clone, Debug, PartialEq)]
pub struct Invocation {
    pub experiment: Experiment,
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

fn dispatch(exp: Experiment, config: &RunConfig, out: &Path, seed: u64) -> Result<(), CliError> {
    match exp {
        Experiment::HartreeRun => run::run_hartree(config, out, seed).map(|_| ()),
        Experiment::Sweep => sweep::run_sweep(config, out, seed).map(|_| ()),
        Experiment::Bench => bench::run_bench(config, out, seed).map(|_| ()),
        Experiment::EulerTest => euler_test::run_euler_test(config, out, seed).map(|_| ()),
        Experiment::FnMc => fn_mc::run_fn_mc(config, out, seed).map(|_| ()),
    }
}

/// Run `f` on a pool with `threads` workers.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::Config("--threads must be >= 1".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Execute one invocation. Mid-run failures leave `error.json` in the
/// output directory; configuration errors leave nothing behind.
pub fn execute(inv: &Invocation) -> Result<(), CliError> {
    let config = RunConfig::load(&inv.config)?;
    let result = with_threads(inv.threads, || dispatch(inv.experiment, &config, &inv.out, inv.seed))?;
    if let Err(e) = &result {
        if e.exit_code() == 3 {
            artifacts::write_error(&inv.out, e)?;
        }
    }
    result
}
