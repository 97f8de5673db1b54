use std::path::{Path, PathBuf};
use std::time::Instant;

use qfluid::coulomb::error_scale;
use qfluid::modulated::{fit_constants, GronwallConstants};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, AGGREGATE_CSV, SLOPES_JSON, SWEEP_JSON};
use crate::config::{Experiment, ParamsSection, RunConfig, SweepOuter};
use crate::error::{runtime, CliError};
use crate::run::{energy_reports, plan, simulate, summarize, write_run, RunPlan, RunRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Calibration,
    Point,
}

/// One row of `aggregate.csv`; empty numeric cells mark failed points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub role: Role,
    pub hbar: f64,
    pub eps: f64,
    pub status: String,
    #[serde(rename = "sup_G")]
    pub sup_g: Option<f64>,
    #[serde(rename = "G0")]
    pub g0: Option<f64>,
    #[serde(rename = "G_T")]
    pub g_t: Option<f64>,
    #[serde(rename = "dev_rho_T")]
    pub dev_rho_t: Option<f64>,
    #[serde(rename = "dev_J_T")]
    pub dev_j_t: Option<f64>,
    /// `dev_J(T)² / 𝔊(T)`.
    pub current_ratio: Option<f64>,
    /// `(1 + log N·1_{d=2}) / (ε² N^{2/d})`.
    pub scaling: f64,
    pub min_margin: Option<f64>,
    pub gronwall_ok: Option<bool>,
}

/// Least-squares line through `(log x, log y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeFit {
    pub x: String,
    pub y: String,
    pub fixed_name: String,
    pub fixed_value: f64,
    pub points: usize,
    pub slope: f64,
    pub intercept: f64,
    /// Sum of squared residuals in log space.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointFailure {
    pub hbar: f64,
    pub eps: f64,
    pub error: String,
    pub message: String,
}

/// `sweep.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSummary {
    pub run_id: String,
    pub seed: u64,
    pub flow: String,
    pub d: usize,
    pub n: usize,
    pub outer: SweepOuter,
    pub hbar: Vec<f64>,
    pub eps: Vec<f64>,
    pub calibration: ParamsSection,
    pub constants: Option<GronwallConstants>,
    pub fit_mean_log_margin: Option<f64>,
    /// `sup_t dev_J(t)² / 𝔊(t)` on the calibration run.
    pub current_constant: Option<f64>,
    pub window: f64,
    pub n_particles: usize,
    pub complete: bool,
    pub failures: Vec<PointFailure>,
}

/// Least-squares fit of `log y = a + b log x`.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // a line through two points interpolates them
    let residual = if lx.len() == 2 {
        0.0
    } else {
        lx.iter()
            .zip(&ly)
            .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
            .sum()
    };
    Some((slope, intercept, residual))
}

fn column(row: &AggregateRow, name: &str) -> Option<f64> {
    match name {
        "sup_G" => row.sup_g,
        "dev_rho_T" => row.dev_rho_t,
        "dev_J_T" => row.dev_j_t,
        _ => None,
    }
}

pub const SLOPE_COLUMNS: [&str; 3] = ["sup_G", "dev_rho_T", "dev_J_T"];

/// Slopes along `ε` at each fixed `ħ` and along `ħ` at each fixed `ε`.
pub fn slope_fits(rows: &[AggregateRow], hbars: &[f64], epss: &[f64]) -> Vec<SlopeFit> {
    let pts: Vec<&AggregateRow> = rows.iter().filter(|r| r.role == Role::Point && r.status == "ok").collect();
    let mut fits = Vec::new();
    for (x, fixed_name, fixed_vals) in [("eps", "hbar", hbars), ("hbar", "eps", epss)] {
        for &fv in fixed_vals {
            let line: Vec<&&AggregateRow> = pts
                .iter()
                .filter(|r| if fixed_name == "hbar" { r.hbar == fv } else { r.eps == fv })
                .collect();
            for y in SLOPE_COLUMNS {
                let xs: Vec<f64> = line.iter().map(|r| if x == "eps" { r.eps } else { r.hbar }).collect();
                let ys: Vec<f64> = line.iter().filter_map(|r| column(r, y)).collect();
                if let Some((slope, intercept, residual)) = log_log_fit(&xs, &ys) {
                    fits.push(SlopeFit {
                        x: x.into(),
                        y: y.into(),
                        fixed_name: fixed_name.into(),
                        fixed_value: fv,
                        points: xs.len(),
                        slope,
                        intercept,
                        residual,
                    });
                }
            }
        }
    }
    fits
}

/// True when `column` strictly decreases as the swept parameter `axis`
/// decreases, for every fixed value of the other parameter.
pub fn decreases_along(rows: &[AggregateRow], axis: &str, name: &str) -> bool {
    let pts: Vec<&AggregateRow> = rows.iter().filter(|r| r.role == Role::Point).collect();
    let key = |r: &AggregateRow| if axis == "eps" { (r.hbar, r.eps) } else { (r.eps, r.hbar) };
    let mut fixed: Vec<f64> = pts.iter().map(|r| key(r).0).collect();
    fixed.sort_by(f64::total_cmp);
    fixed.dedup();
    fixed.iter().all(|&f| {
        let mut line: Vec<(f64, Option<f64>)> =
            pts.iter().filter(|r| key(r).0 == f).map(|r| (key(r).1, column(r, name))).collect();
        line.sort_by(|a, b| b.0.total_cmp(&a.0));
        line.windows(2).all(|w| match (w[0].1, w[1].1) {
            (Some(a), Some(b)) => b < a,
            _ => false,
        })
    })
}

fn check_list(name: &str, values: &[f64]) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::EmptyPlan(format!("sweep list '{name}' is empty")));
    }
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(CliError::Config(format!("sweep list '{name}' must hold positive values")));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    if s.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::Config(format!("sweep list '{name}' repeats a value")));
    }
    Ok(())
}

fn point_dir(out: &Path, role: Role, hbar: f64, eps: f64) -> PathBuf {
    match role {
        Role::Calibration => out.join("calibration"),
        Role::Point => out.join("points").join(format!("hbar{hbar:e}_eps{eps:e}")),
    }
}

struct Job {
    role: Role,
    hbar: f64,
    eps: f64,
    order: (usize, usize),
    plan: RunPlan,
}

/// `sweep`: Hartree runs over an `(ħ, ε)` grid with Gronwall constants
/// fitted on the calibration run and frozen for every other point.
pub fn run_sweep(config: &RunConfig, out: &Path, seed: u64) -> Result<SweepSummary, CliError> {
    config.check_experiment(Experiment::Sweep)?;
    config.check_gronwall()?;
    let sw = config.sweep.clone().ok_or_else(|| CliError::Config("missing [sweep] section".into()))?;
    check_list("hbar", &sw.hbar)?;
    check_list("eps", &sw.eps)?;
    if sw.hbar.len() < 2 && sw.eps.len() < 2 {
        return Err(CliError::Config("a sweep needs at least two values of hbar or eps".into()));
    }
    if sw.n_particles < 2 {
        return Err(CliError::Config("n_particles must be >= 2".into()));
    }
    let max = |v: &[f64]| v.iter().copied().fold(f64::MIN, f64::max);
    let cal = sw.calibration.unwrap_or(ParamsSection {
        hbar: max(&sw.hbar),
        eps: max(&sw.eps),
    });
    let grid = config.grid_spec()?;

    let mut pairs = Vec::new();
    match sw.outer {
        SweepOuter::Hbar => {
            for (i, &h) in sw.hbar.iter().enumerate() {
                for (j, &e) in sw.eps.iter().enumerate() {
                    pairs.push((h, e, (i, j)));
                }
            }
        }
        SweepOuter::Eps => {
            for (j, &e) in sw.eps.iter().enumerate() {
                for (i, &h) in sw.hbar.iter().enumerate() {
                    pairs.push((h, e, (i, j)));
                }
            }
        }
    }
    let mut jobs = vec![Job {
        role: Role::Calibration,
        hbar: cal.hbar,
        eps: cal.eps,
        order: (0, 0),
        plan: plan(config, cal.hbar, cal.eps, seed)?,
    }];
    for (h, e, order) in pairs {
        jobs.push(Job {
            role: Role::Point,
            hbar: h,
            eps: e,
            order,
            plan: plan(config, h, e, seed)?,
        });
    }

    let clock = Instant::now();
    std::fs::create_dir_all(out)?;
    let results: Vec<Result<RunRecord, CliError>> = jobs
        .par_iter()
        .map(|j| {
            let dir = point_dir(out, j.role, j.hbar, j.eps);
            std::fs::create_dir_all(&dir)?;
            simulate(&j.plan, Some(&dir)).map_err(|(_, e)| {
                let _ = artifacts::write_error(&dir, &e);
                e
            })
        })
        .collect();

    let window = config.gronwall.window.unwrap_or(jobs[0].plan.t_end);
    let (fit, current_constant) = match &results[0] {
        Ok(rec) => {
            let series: Vec<(f64, f64)> =
                rec.rows.iter().filter(|(t, _)| *t <= window).map(|(t, e)| (*t, e.total)).collect();
            let fit = fit_constants(&series, &rec.history, cal.eps, &config.gronwall.c_d_grid).map_err(runtime)?;
            let c = rec
                .rows
                .iter()
                .filter(|(_, e)| e.total > 0.0)
                .map(|(_, e)| e.dev_j * e.dev_j / e.total)
                .fold(0.0, f64::max);
            (Some(fit), Some(c))
        }
        Err(_) => (None, None),
    };

    let sweep_id = artifacts::run_id(Experiment::Sweep, config, seed);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (job, res) in jobs.iter().zip(&results) {
        let scaling = error_scale(grid.dim(), sw.n_particles) / (job.eps * job.eps);
        let mut row = AggregateRow {
            role: job.role,
            hbar: job.hbar,
            eps: job.eps,
            status: "failed".into(),
            sup_g: None,
            g0: None,
            g_t: None,
            dev_rho_t: None,
            dev_j_t: None,
            current_ratio: None,
            scaling,
            min_margin: None,
            gronwall_ok: None,
        };
        match (res, &fit) {
            (Ok(rec), Some(fit)) => {
                let reports = energy_reports(rec, job.eps, &fit.constants)?;
                let dir = point_dir(out, job.role, job.hbar, job.eps);
                let id = artifacts::run_id_child(&sweep_id, &format!("{:?}:{}:{}", job.role, job.hbar, job.eps));
                let s = summarize(&job.plan, rec, &reports, fit.constants, window, id);
                write_run(&dir, &reports, &s)?;
                let last = reports.last().expect("runs report t = 0");
                row.status = "ok".into();
                row.sup_g = Some(s.max_g);
                row.g0 = Some(s.g0);
                row.g_t = Some(last.total);
                row.dev_rho_t = Some(last.dev_rho);
                row.dev_j_t = Some(last.dev_j);
                row.current_ratio = Some(if last.total > 0.0 { last.dev_j * last.dev_j / last.total } else { 0.0 });
                row.min_margin = Some(s.min_margin);
                row.gronwall_ok = Some(s.gronwall_ok);
            }
            (Ok(_), None) => failures.push(PointFailure {
                hbar: job.hbar,
                eps: job.eps,
                error: "CalibrationFailed".into(),
                message: "no Gronwall constants: the calibration run failed".into(),
            }),
            (Err(e), _) => failures.push(PointFailure {
                hbar: job.hbar,
                eps: job.eps,
                error: e.kind(),
                message: e.to_string(),
            }),
        }
        rows.push((job.role, job.order, row));
    }
    rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let rows: Vec<AggregateRow> = rows.into_iter().map(|(_, _, r)| r).collect();
    artifacts::write_csv(&out.join(AGGREGATE_CSV), &rows)?;
    artifacts::write_json(&out.join(SLOPES_JSON), &slope_fits(&rows, &sw.hbar, &sw.eps))?;

    let summary = SweepSummary {
        run_id: sweep_id,
        seed,
        flow: jobs[0].plan.flow.label(),
        d: grid.dim(),
        n: grid.n(),
        outer: sw.outer,
        hbar: sw.hbar.clone(),
        eps: sw.eps.clone(),
        calibration: cal,
        constants: fit.map(|f| f.constants),
        fit_mean_log_margin: fit.map(|f| f.mean_log_margin),
        current_constant,
        window,
        n_particles: sw.n_particles,
        complete: failures.is_empty(),
        failures,
    };
    artifacts::write_json(&out.join(SWEEP_JSON), &summary)?;
    artifacts::write_timing(out, clock.elapsed().as_secs_f64())?;
    if !summary.complete {
        return Err(CliError::Partial {
            failed: summary.failures.len(),
            total: jobs.len(),
        });
    }
    Ok(summary)
}
