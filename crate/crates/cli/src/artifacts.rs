use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Experiment, RunConfig};
use crate::error::{CliError, ErrorRecord};

pub const ENERGY_CSV: &str = "energy.csv";
pub const FLOW_CSV: &str = "flow.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const AGGREGATE_CSV: &str = "aggregate.csv";
pub const SLOPES_JSON: &str = "slopes.json";
pub const SWEEP_JSON: &str = "sweep.json";
pub const BENCH_JSONL: &str = "bench.jsonl";
pub const BENCH_SUMMARY_JSON: &str = "bench_summary.json";
pub const FN_MC_JSON: &str = "fn_mc.json";
pub const EULER_JSON: &str = "euler.json";
pub const ERROR_JSON: &str = "error.json";
pub const TIMING_JSON: &str = "timing.json";

pub const FLOW_CSV_HEADER: &str = "t,energy,enstrophy,gradu_inf,c11";
pub const AGGREGATE_CSV_HEADER: &str =
    "role,hbar,eps,status,sup_G,G0,G_T,dev_rho_T,dev_J_T,current_ratio,scaling,min_margin,gronwall_ok";

/// JSON schemas shipped with the crate, keyed by artifact file name.
pub const SCHEMAS: &[(&str, &str)] = &[
    (SUMMARY_JSON, include_str!("../schemas/summary.schema.json")),
    (SWEEP_JSON, include_str!("../schemas/sweep.schema.json")),
    (SLOPES_JSON, include_str!("../schemas/slopes.schema.json")),
    (BENCH_JSONL, include_str!("../schemas/bench_report.schema.json")),
    (BENCH_SUMMARY_JSON, include_str!("../schemas/bench_summary.schema.json")),
    (FN_MC_JSON, include_str!("../schemas/fn_mc.schema.json")),
    (EULER_JSON, include_str!("../schemas/euler.schema.json")),
    (ERROR_JSON, include_str!("../schemas/error.schema.json")),
];

pub fn schema_for(file: &str) -> Option<&'static str> {
    SCHEMAS.iter().find(|(f, _)| *f == file).map(|(_, s)| *s)
}

/// 40-hex-digit id of `(experiment, config, seed)`.
pub fn run_id(exp: Experiment, config: &RunConfig, seed: u64) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    let mut h = Sha256::new();
    h.update(exp.name().as_bytes());
    h.update([0u8]);
    h.update(canonical.as_bytes());
    h.update([0u8]);
    h.update(seed.to_le_bytes());
    let hex: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    hex[..40].to_string()
}

/// Id of a sub-run, derived from its parent's id and a label.
pub fn run_id_child(parent: &str, label: &str) -> String {
    let mut h = Sha256::new();
    h.update(parent.as_bytes());
    h.update([0u8]);
    h.update(label.as_bytes());
    let hex: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    hex[..40].to_string()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Rows with a header taken from the serialized field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_error(dir: &Path, err: &CliError) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let rec: ErrorRecord = err.record();
    write_json(&dir.join(ERROR_JSON), &rec)
}

#[derive(Serialize)]
struct Timing {
    wall_seconds: f64,
}

/// Wall-clock time is kept out of the deterministic artifacts.
pub fn write_timing(dir: &Path, seconds: f64) -> Result<(), CliError> {
    write_json(&dir.join(TIMING_JSON), &Timing { wall_seconds: seconds })
}
