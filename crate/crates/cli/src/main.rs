use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qfluid_cli::{execute, Experiment, Invocation};

#[derive(Parser)]
#[command(name = "qfluid", version, about = "Hartree, Euler and modulated-energy experiments on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One Hartree run with WKB initial data and the energy time series.
    HartreeRun(Common),
    /// Hartree runs over an (hbar, eps) grid with frozen Gronwall constants.
    Sweep(Common),
    /// Commutator, coercivity and lower-bound benches on random points.
    Bench(Common),
    /// Evolve a 2D Euler flow and report its invariants.
    EulerTest(Common),
    /// Monte Carlo expectation of F_N against its closed form.
    FnMc(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, c) = match cli.command {
        Command::HartreeRun(c) => (Experiment::HartreeRun, c),
        Command::Sweep(c) => (Experiment::Sweep, c),
        Command::Bench(c) => (Experiment::Bench, c),
        Command::EulerTest(c) => (Experiment::EulerTest, c),
        Command::FnMc(c) => (Experiment::FnMc, c),
    };
    let inv = Invocation {
        experiment,
        config: c.config,
        out: c.out,
        seed: c.seed,
        threads: c.threads,
    };
    match execute(&inv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::to_string(&e.record()).unwrap_or_else(|_| e.to_string());
            eprintln!("{record}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
