use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qfluid_cli::artifacts::{self, AGGREGATE_CSV_HEADER};
use qfluid_cli::bench::BenchLine;
use qfluid_cli::run::RunSummary;
use qfluid_cli::sweep::SweepSummary;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_qfluid");

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn qfluid(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_ok(sub: &str, config: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = qfluid(&args);
    assert!(o.status.success(), "{sub} failed: {}", String::from_utf8_lossy(&o.stderr));
}

/// Validate `instance` against the shipped schema with Python's `jsonschema`.
fn validate(schema_file: &str, instance: &serde_json::Value) {
    let schema = artifacts::schema_for(schema_file).expect("schema exists");
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("schema.json"), schema).unwrap();
    std::fs::write(dir.path().join("instance.json"), instance.to_string()).unwrap();
    let script = "import json, sys, jsonschema\n\
        s = json.load(open(sys.argv[1])); i = json.load(open(sys.argv[2]))\n\
        jsonschema.Draft202012Validator.check_schema(s)\n\
        jsonschema.Draft202012Validator(s, format_checker=jsonschema.FormatChecker()).validate(i)\n";
    let o = Command::new("python3")
        .arg("-c")
        .arg(script)
        .arg(dir.path().join("schema.json"))
        .arg(dir.path().join("instance.json"))
        .output()
        .expect("python3 with jsonschema is available");
    assert!(o.status.success(), "{schema_file}: {}", String::from_utf8_lossy(&o.stderr));
}

fn validate_file(schema_file: &str, path: &Path) {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    validate(schema_file, &v);
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

const SHEAR: &str = r#"
[grid]
d = 2
n = 64
[flow]
name = "shear-2d"
[params]
hbar = 0.01
eps = 0.2
[wkb]
packets_per_axis = 8
[time]
t_end = 0.05
dt_max = 1e-3
report_every = 10
"#;

#[test]
fn hartree_run_is_deterministic_and_schema_valid() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "shear.toml", SHEAR);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok("hartree-run", &cfg, &a, &["--threads", "1"]);
    run_ok("hartree-run", &cfg, &b, &["--threads", "2"]);
    for f in ["energy.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    validate_file("summary.json", &a.join("summary.json"));
    let header = std::fs::read_to_string(a.join("energy.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap(), "t,kinetic,potential,total,gronwall_rhs,dev_rho,dev_J");

    let t = csv_column(&a.join("energy.csv"), "t");
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(*t.last().unwrap(), 0.05);
    assert_eq!(t.len(), 6);

    let s: RunSummary = serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    // envelope cost dħ/4 plus the phase-sampling cost of the packet lattice
    let hbar = 0.01;
    let expected = 2.0 * hbar / 4.0 + (1.0 - (-2.0 * PI * PI * hbar).exp());
    assert!((s.g0 - expected).abs() <= 0.2 * expected, "g0 = {}, expected {expected}", s.g0);
    assert!(s.max_mass_drift < 1e-12);
}

#[test]
fn zero_horizon_writes_one_row() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "t0.toml", &SHEAR.replace("t_end = 0.05", "t_end = 0.0"));
    let out = tmp.path().join("out");
    run_ok("hartree-run", &cfg, &out, &[]);
    let text = std::fs::read_to_string(out.join("energy.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    let s: RunSummary = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s.g0, s.final_g);
}

#[test]
fn config_errors_exit_2_without_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("unknown_key.toml", SHEAR.replace("[time]", "[time]\nbogus = 1")),
        ("bad_n.toml", SHEAR.replace("n = 64", "n = 63")),
        ("bad_hbar.toml", SHEAR.replace("hbar = 0.01", "hbar = -0.01")),
        ("coarse.toml", SHEAR.replace("n = 64", "n = 8")),
        ("bad_flow.toml", SHEAR.replace("shear-2d", "no-such-flow")),
    ];
    for (name, text) in cases {
        let cfg = write_config(tmp.path(), name, &text);
        let out = tmp.path().join(format!("out_{name}"));
        let o = qfluid(&["hartree-run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists(), "{name} left artifacts");
        let rec: serde_json::Value = serde_json::from_slice(&o.stderr).expect("stderr is a JSON error record");
        validate("error.json", &rec);
        assert_eq!(rec["exit_code"], 2);
    }
    let o = qfluid(&["hartree-run", "--config", "/nonexistent.toml", "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_threads_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "shear.toml", SHEAR);
    let out = tmp.path().join("out");
    let o = qfluid(&["hartree-run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

const BENCH: &str = r#"
[grid]
d = 2
n = 32
[flow]
name = "shear-2d"
[bench]
n_points = [16, 32]
seed_count = 2
"#;

#[test]
fn bench_is_reproducible_and_schema_valid() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bench.toml", BENCH);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok("bench", &cfg, &a, &["--seed", "7", "--threads", "1"]);
    run_ok("bench", &cfg, &b, &["--seed", "7", "--threads", "2"]);
    let text = std::fs::read_to_string(a.join("bench.jsonl")).unwrap();
    assert_eq!(text, std::fs::read_to_string(b.join("bench.jsonl")).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2 * 2 * 3);
    for l in &lines {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        validate("bench.jsonl", &v);
        let line: BenchLine = serde_json::from_value(v).unwrap();
        assert!(line.report.fitted_constant.is_finite());
    }
    validate_file("bench_summary.json", &a.join("bench_summary.json"));

    let c = tmp.path().join("c");
    run_ok("bench", &cfg, &c, &["--seed", "8"]);
    assert_ne!(text, std::fs::read_to_string(c.join("bench.jsonl")).unwrap());
}

#[test]
fn empty_seed_list_is_an_empty_plan() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bench.toml", &BENCH.replace("seed_count = 2", "seeds = []"));
    let out = tmp.path().join("out");
    let o = qfluid(&["bench", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let rec: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(rec["error"], "EmptyPlan");
    assert!(!out.exists());
}

const SWEEP: &str = r#"
[grid]
d = 2
n = 32
[flow]
name = "shear-2d"
[wkb]
packets_per_axis = 6
[time]
t_end = 0.02
dt_max = 2e-3
report_every = 5
[sweep]
hbar = [0.05, 0.04]
eps = [0.4, 0.3]
outer = "hbar"
calibration = { hbar = 0.06, eps = 0.5 }
n_particles = 64
"#;

#[test]
fn sweep_order_does_not_change_the_aggregate() {
    let tmp = TempDir::new().unwrap();
    let cfg_h = write_config(tmp.path(), "h.toml", SWEEP);
    let cfg_e = write_config(tmp.path(), "e.toml", &SWEEP.replace("outer = \"hbar\"", "outer = \"eps\""));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok("sweep", &cfg_h, &a, &[]);
    run_ok("sweep", &cfg_e, &b, &[]);
    let agg = std::fs::read_to_string(a.join("aggregate.csv")).unwrap();
    assert_eq!(agg, std::fs::read_to_string(b.join("aggregate.csv")).unwrap());
    assert_eq!(agg.lines().next().unwrap(), AGGREGATE_CSV_HEADER);
    assert_eq!(agg.lines().count(), 1 + 1 + 4);

    validate_file("sweep.json", &a.join("sweep.json"));
    let slopes: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("slopes.json")).unwrap()).unwrap();
    validate("slopes.json", &slopes);
    // two points per line: the log-log fit is exact
    for fit in slopes.as_array().unwrap() {
        assert_eq!(fit["points"], 2);
        assert_eq!(fit["residual"].as_f64().unwrap(), 0.0);
    }
    let s: SweepSummary = serde_json::from_str(&std::fs::read_to_string(a.join("sweep.json")).unwrap()).unwrap();
    assert!(s.complete && s.constants.is_some());
    assert!(a.join("calibration").join("energy.csv").exists());
    assert_eq!(std::fs::read_dir(a.join("points")).unwrap().count(), 4);
}

#[test]
fn sweep_rejects_unresolved_points_before_running() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", &SWEEP.replace("hbar = [0.05, 0.04]", "hbar = [0.05, 0.001]"));
    let out = tmp.path().join("out");
    let o = qfluid(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn euler_test_on_a_stationary_flow() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "e.toml",
        "[grid]\nd = 2\nn = 32\n[flow]\nname = \"taylor-green-2d\"\n[time]\nt_end = 0.1\ndt_max = 1e-2\nreport_every = 5\n",
    );
    let out = tmp.path().join("out");
    run_ok("euler-test", &cfg, &out, &[]);
    validate_file("euler.json", &out.join("euler.json"));
    let e: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("euler.json")).unwrap()).unwrap();
    assert!(e["max_vorticity_change"].as_f64().unwrap() < 1e-10);
    let header = std::fs::read_to_string(out.join("flow.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap(), artifacts::FLOW_CSV_HEADER);
}

#[test]
fn fn_mc_is_schema_valid() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "mc.toml",
        "[grid]\nd = 2\nn = 32\n[mc]\nn_points = 8\nsamples = 200\ncheck_doubling = true\n\
         densities = [{ amplitude = 0.5, mode = [1, 0, 0] }]\n",
    );
    let out = tmp.path().join("out");
    run_ok("fn-mc", &cfg, &out, &["--seed", "3"]);
    validate_file("fn_mc.json", &out.join("fn_mc.json"));
}
