use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use qfluid::coulomb::uniform_density;
use qfluid::modulated::{
    coercivity_bench, commutator_bench, lower_bound_constant, BenchKind, InequalityBenchReport,
};
use qfluid::sampling::{stream_rng, DensitySampler};
use qfluid::ScalarField;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, BENCH_JSONL, BENCH_SUMMARY_JSON};
use crate::config::{Experiment, RunConfig};
use crate::error::{runtime, CliError};
use crate::run::initial_flow;

/// One line of `bench.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchLine {
    pub run_id: String,
    #[serde(flatten)]
    pub report: InequalityBenchReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchFailure {
    pub kind: BenchKind,
    pub n: usize,
    pub seed: u64,
    pub error: String,
    pub message: String,
}

/// Fitted-constant statistics of one `(kind, N)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantStats {
    pub kind: BenchKind,
    pub n: usize,
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindBand {
    pub kind: BenchKind,
    pub ratio: f64,
}

/// `bench_summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSummary {
    pub run_id: String,
    pub d: usize,
    pub flow: String,
    pub test_mode: [i64; 3],
    pub n_points: Vec<usize>,
    pub seeds: Vec<u64>,
    pub lines: usize,
    pub stats: Vec<ConstantStats>,
    /// Per kind: largest over `N` of the per-`N` maximum constant divided by
    /// the smallest.
    pub band: Vec<KindBand>,
    /// Lower-bound constant fitted on the smallest `N` (maximum over seeds).
    pub lower_bound_fit: Option<f64>,
    /// Seeds at the largest `N` with `F_N < -C·error_scale`.
    pub lower_bound_violations: Option<usize>,
    pub complete: bool,
    pub failures: Vec<BenchFailure>,
}

fn stats(kind: BenchKind, n: usize, values: &mut [f64]) -> ConstantStats {
    values.sort_by(f64::total_cmp);
    let len = values.len();
    let median = if len == 0 {
        f64::NAN
    } else if len % 2 == 1 {
        values[len / 2]
    } else {
        0.5 * (values[len / 2 - 1] + values[len / 2])
    };
    ConstantStats {
        kind,
        n,
        count: len,
        min: values.first().copied().unwrap_or(f64::NAN),
        median,
        max: values.last().copied().unwrap_or(f64::NAN),
    }
}

/// Aggregate report lines into per-cell statistics and the stability checks.
pub fn summarize_reports(
    reports: &[InequalityBenchReport],
    kinds: &[BenchKind],
    n_points: &[usize],
) -> (Vec<ConstantStats>, Vec<KindBand>, Option<f64>, Option<usize>) {
    let mut cells = Vec::new();
    let mut band = Vec::new();
    for &kind in kinds {
        let mut maxima = Vec::new();
        for &n in n_points {
            let mut v: Vec<f64> = reports.iter().filter(|r| r.kind == kind && r.n == n).map(|r| r.fitted_constant).collect();
            let s = stats(kind, n, &mut v);
            if s.count > 0 {
                maxima.push(s.max);
            }
            cells.push(s);
        }
        if !maxima.is_empty() {
            let hi = maxima.iter().copied().fold(f64::MIN, f64::max);
            let lo = maxima.iter().copied().fold(f64::MAX, f64::min);
            band.push(KindBand {
                kind,
                ratio: if hi == 0.0 { 1.0 } else { hi / lo },
            });
        }
    }
    let lb: Vec<&InequalityBenchReport> = reports.iter().filter(|r| r.kind == BenchKind::LowerBound).collect();
    let (nmin, nmax) = (n_points.iter().min(), n_points.iter().max());
    let (fit, violations) = match (nmin, nmax) {
        (Some(&lo), Some(&hi)) if lo < hi && !lb.is_empty() => {
            let c = lb.iter().filter(|r| r.n == lo).map(|r| r.fitted_constant).fold(0.0, f64::max);
            let v = lb.iter().filter(|r| r.n == hi && r.f_n < -c * r.error_scale).count();
            (Some(c), Some(v))
        }
        _ => (None, None),
    };
    (cells, band, fit, violations)
}

/// Seeds from the config: an explicit list, or `seed_count` values from `base`.
pub fn bench_seeds(config: &RunConfig, base: u64) -> Result<Vec<u64>, CliError> {
    let b = config.bench.as_ref().ok_or_else(|| CliError::Config("missing [bench] section".into()))?;
    let seeds = match (&b.seeds, b.seed_count) {
        (Some(_), Some(_)) => return Err(CliError::Config("[bench] takes seeds or seed_count, not both".into())),
        (Some(s), None) => s.clone(),
        (None, Some(c)) => (0..c as u64).map(|i| base.wrapping_add(i)).collect(),
        (None, None) => return Err(CliError::Config("[bench] needs seeds or seed_count".into())),
    };
    if seeds.is_empty() {
        return Err(CliError::EmptyPlan("no bench seeds".into()));
    }
    Ok(seeds)
}

/// `bench`: inequality benches on `N` i.i.d. uniform points per seed.
pub fn run_bench(config: &RunConfig, out: &Path, seed: u64) -> Result<BenchSummary, CliError> {
    config.check_experiment(Experiment::Bench)?;
    let b = config.bench.clone().ok_or_else(|| CliError::Config("missing [bench] section".into()))?;
    let seeds = bench_seeds(config, seed)?;
    if b.n_points.is_empty() {
        return Err(CliError::EmptyPlan("no bench sizes".into()));
    }
    if b.kinds.is_empty() {
        return Err(CliError::EmptyPlan("no bench kinds".into()));
    }
    if b.n_points.iter().any(|&n| n < 2) {
        return Err(CliError::Config("bench sizes must be >= 2".into()));
    }
    let grid = config.grid_spec()?;
    let flow = config.flow_source()?;
    let (v, _) = initial_flow(grid, &flow, seed)?;
    let k = b.test_mode;
    let phi = ScalarField::from_fn(grid, |x| (2.0 * PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2])).cos());
    let mu = uniform_density(grid);
    let sampler = DensitySampler::new(&mu).map_err(CliError::from_config)?;

    let clock = Instant::now();
    std::fs::create_dir_all(out)?;
    let items: Vec<(usize, u64)> = b.n_points.iter().flat_map(|&n| seeds.iter().map(move |&s| (n, s))).collect();
    let results: Vec<Vec<Result<InequalityBenchReport, BenchFailure>>> = items
        .par_iter()
        .map(|&(n, s)| {
            let config = sampler.sample_config(n, &mut stream_rng(s, n as u64));
            b.kinds
                .iter()
                .map(|&kind| {
                    let rep = match &config {
                        Ok(c) => match kind {
                            BenchKind::Commutator => commutator_bench(c, &v, &mu, s),
                            BenchKind::Coercivity => coercivity_bench(c, &phi, &mu, s),
                            BenchKind::LowerBound => lower_bound_constant(c, &mu, s),
                        },
                        Err(e) => Err(qfluid::Error::InvalidParameter(e.to_string())),
                    };
                    rep.map_err(|e| {
                        let e = runtime(e);
                        BenchFailure {
                            kind,
                            n,
                            seed: s,
                            error: e.kind(),
                            message: e.to_string(),
                        }
                    })
                })
                .collect()
        })
        .collect();

    let run_id = artifacts::run_id(Experiment::Bench, config, seed);
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let mut text = String::new();
    for r in results.into_iter().flatten() {
        match r {
            Ok(rep) => {
                let line = BenchLine {
                    run_id: run_id.clone(),
                    report: rep.clone(),
                };
                text.push_str(&serde_json::to_string(&line)?);
                text.push('\n');
                reports.push(rep);
            }
            Err(f) => failures.push(f),
        }
    }
    std::fs::write(out.join(BENCH_JSONL), text)?;
    let (stats, band, lower_bound_fit, lower_bound_violations) = summarize_reports(&reports, &b.kinds, &b.n_points);
    let summary = BenchSummary {
        run_id,
        d: grid.dim(),
        flow: flow.label(),
        test_mode: k,
        n_points: b.n_points.clone(),
        seeds,
        lines: reports.len(),
        stats,
        band,
        lower_bound_fit,
        lower_bound_violations,
        complete: failures.is_empty(),
        failures,
    };
    artifacts::write_json(&out.join(BENCH_SUMMARY_JSON), &summary)?;
    artifacts::write_timing(out, clock.elapsed().as_secs_f64())?;
    if !summary.complete {
        return Err(CliError::Partial {
            failed: summary.failures.len(),
            total: items.len() * b.kinds.len(),
        });
    }
    Ok(summary)
}
