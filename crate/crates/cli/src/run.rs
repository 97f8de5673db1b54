use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use qfluid::container;
use qfluid::euler::{
    cfl_dt, flow_snapshot, random_vorticity, state_snapshot, velocity_from_vorticity, EulerStepper,
    FlowSnapshot, FlowState,
};
use qfluid::hartree::{phase_dt, HartreeStepper, MixedState, PhysicalParams};
use qfluid::modulated::{
    gronwall_rhs, modulated_energy, EnergyReport, FlowSample, GronwallConstants, ModulatedEnergy,
};
use qfluid::wkb::{default_density, monokinetic_mixture};
use qfluid::{GridSpec, ScalarField, VectorField};
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, ENERGY_CSV, SUMMARY_JSON};
use crate::config::{Experiment, FlowSource, RunConfig};
use crate::error::{runtime, CliError};

/// Safety factor applied to the phase-resolution and CFL bounds on `dt`.
pub const DT_SAFETY: f64 = 0.5;

/// Candidate time steps; the run uses the smallest, shrunk so that an
/// integer number of steps lands on `t_end`. `None` means unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtRule {
    pub cfl: Option<f64>,
    pub phase: Option<f64>,
    pub cap: f64,
    pub dt: f64,
    pub steps: usize,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// A validated run, ready to integrate.
#[derive(Clone, Debug)]
pub struct RunPlan {
    pub grid: GridSpec,
    pub flow: FlowSource,
    pub params: PhysicalParams,
    pub packets_per_axis: usize,
    pub sigma: f64,
    pub t_end: f64,
    pub dt_rule: DtRule,
    pub report_every: usize,
    pub dump_every: usize,
    pub seed: u64,
    pub initial: MixedState,
    pub omega0: Option<ScalarField>,
    pub snapshot0: FlowSnapshot,
}

/// Initial velocity (and vorticity for evolving flows).
pub fn initial_flow(
    grid: GridSpec,
    flow: &FlowSource,
    seed: u64,
) -> Result<(VectorField, Option<ScalarField>), CliError> {
    let omega = match flow {
        FlowSource::Analytic(f) => return Ok((f.velocity(grid).map_err(CliError::from_config)?, None)),
        FlowSource::RandomVorticity { modes, amplitude } => {
            random_vorticity(grid, *modes, *amplitude, seed).map_err(CliError::from_config)?
        }
        FlowSource::VorticityFile(path) => {
            let w = container::read_real(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if w.grid() != grid {
                return Err(CliError::Config(format!(
                    "{} holds a {}D grid with n = {}, config asks for {}D with n = {}",
                    path.display(),
                    w.grid().dim(),
                    w.grid().n(),
                    grid.dim(),
                    grid.n()
                )));
            }
            w
        }
    };
    let u = velocity_from_vorticity(&omega).map_err(CliError::from_config)?;
    Ok((u, Some(omega)))
}

/// Validate every guard and build the initial state for one `(ħ, ε)`.
pub fn plan(config: &RunConfig, hbar: f64, eps: f64, seed: u64) -> Result<RunPlan, CliError> {
    let grid = config.grid_spec()?;
    let flow = config.flow_source()?;
    let time = config.time_section()?;
    let params = PhysicalParams::new(hbar, eps).map_err(CliError::from_config)?;
    let sigma = config.sigma(hbar)?;
    let m = config.wkb.packets_per_axis;
    if m == 0 {
        return Err(CliError::Config("packets_per_axis must be >= 1".into()));
    }
    let (u, omega0) = initial_flow(grid, &flow, seed)?;
    // carrier wavenumbers u/(2πħ) must stay below half the Nyquist wavenumber
    let umax = u.max_norm();
    let nyquist = (grid.n() / 2) as f64;
    if hbar * 2.0 * PI * nyquist < 2.0 * umax {
        return Err(CliError::from_config(qfluid::Error::ResolutionGuard(format!(
            "hbar = {hbar} with |u| = {umax:.3} needs n >= {}",
            (4.0 * umax / (2.0 * PI * hbar)).ceil()
        ))));
    }
    let snapshot0 = flow_snapshot(&u, 0.0).map_err(CliError::from_config)?;
    let rho0 = default_density(&snapshot0.corrector, &params);
    let initial = monokinetic_mixture(&u, &rho0, &params, m, sigma).map_err(CliError::from_config)?;

    let cfl = if flow.is_evolving() { DT_SAFETY * cfl_dt(&u) } else { f64::INFINITY };
    let phase = DT_SAFETY * phase_dt(&initial, &params).map_err(CliError::from_config)?;
    let bound = cfl.min(phase).min(time.dt_max);
    let steps = if time.t_end == 0.0 { 0 } else { (time.t_end / bound * (1.0 - 1e-12)).ceil() as usize };
    let dt = if steps == 0 { bound } else { time.t_end / steps as f64 };
    Ok(RunPlan {
        grid,
        flow,
        params,
        packets_per_axis: m,
        sigma,
        t_end: time.t_end,
        dt_rule: DtRule {
            cfl: finite(cfl),
            phase: finite(phase),
            cap: time.dt_max,
            dt,
            steps,
        },
        report_every: time.report_every,
        dump_every: time.dump_every,
        seed,
        initial,
        omega0,
        snapshot0,
    })
}

/// Raw output of an integration, before Gronwall constants are chosen.
#[derive(Clone, Debug, Default)]
pub struct RunRecord {
    pub rows: Vec<(f64, ModulatedEnergy)>,
    pub history: Vec<FlowSample>,
    pub max_mass_drift: f64,
}

fn dump(dir: &Path, step: usize, state: &MixedState, params: &PhysicalParams) -> Result<(), CliError> {
    let dir = dir.join("dumps");
    std::fs::create_dir_all(&dir)?;
    container::write_real(&dir.join(format!("rho_{step:06}.ell")), &state.density()).map_err(runtime)?;
    let j = state.current(params);
    for (a, c) in j.components().iter().enumerate() {
        container::write_real(&dir.join(format!("j{}_{step:06}.ell", a + 1)), c).map_err(runtime)?;
    }
    Ok(())
}

/// Integrate the plan. On a mid-run guard the record so far is returned
/// together with the error.
pub fn simulate(plan: &RunPlan, dump_dir: Option<&Path>) -> Result<RunRecord, (RunRecord, CliError)> {
    let mut record = RunRecord::default();
    match integrate(plan, dump_dir, &mut record) {
        Ok(()) => Ok(record),
        Err(e) => Err((record, e)),
    }
}

fn report(
    plan: &RunPlan,
    step: usize,
    hartree: &HartreeStepper,
    euler: &Option<EulerStepper>,
    record: &mut RunRecord,
) -> Result<(), CliError> {
    let t = if step == plan.dt_rule.steps { plan.t_end } else { step as f64 * plan.dt_rule.dt };
    let snap = match euler {
        Some(e) => {
            let mut s = state_snapshot(&e.state()).map_err(runtime)?;
            s.t = t;
            s
        }
        None => FlowSnapshot {
            t,
            ..plan.snapshot0.clone()
        },
    };
    let e = modulated_energy(hartree.state(), &snap, &plan.params).map_err(runtime)?;
    record.rows.push((t, e));
    record.history.push(FlowSample::from(&snap));
    Ok(())
}

fn integrate(plan: &RunPlan, dump_dir: Option<&Path>, record: &mut RunRecord) -> Result<(), CliError> {
    let p = plan.params;
    let mut hartree = HartreeStepper::new(plan.initial.clone(), p).map_err(runtime)?;
    let mut euler = match &plan.omega0 {
        Some(w) => Some(EulerStepper::new(&FlowState::new(w.clone(), 0.0).map_err(runtime)?).map_err(runtime)?),
        None => None,
    };
    let steps = plan.dt_rule.steps;
    let dt = plan.dt_rule.dt;
    let mass0 = hartree.density().mean();
    report(plan, 0, &hartree, &euler, record)?;
    if let Some(dir) = dump_dir {
        if plan.dump_every > 0 {
            dump(dir, 0, hartree.state(), &p)?;
        }
    }
    for step in 1..=steps {
        hartree.step(dt).map_err(runtime)?;
        if let Some(e) = euler.as_mut() {
            e.step(dt).map_err(runtime)?;
        }
        record.max_mass_drift = record.max_mass_drift.max((hartree.density().mean() - mass0).abs());
        if step % plan.report_every == 0 || step == steps {
            report(plan, step, &hartree, &euler, record)?;
        }
        if let Some(dir) = dump_dir {
            if (plan.dump_every > 0 && step % plan.dump_every == 0) || step == steps {
                dump(dir, step, hartree.state(), &p)?;
            }
        }
    }
    if steps == 0 {
        if let Some(dir) = dump_dir {
            dump(dir, 0, hartree.state(), &p)?;
        }
    }
    Ok(())
}

/// Per-run summary (`summary.json`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub run_id: String,
    pub experiment: String,
    pub seed: u64,
    pub flow: String,
    pub d: usize,
    pub n: usize,
    pub hbar: f64,
    pub eps: f64,
    pub packets_per_axis: usize,
    pub orbitals: usize,
    pub sigma: f64,
    pub t_end: f64,
    pub dt_rule: DtRule,
    pub report_every: usize,
    pub constants: GronwallConstants,
    pub window: f64,
    pub g0: f64,
    pub final_g: f64,
    pub max_g: f64,
    /// `min_t (rhs(t) - 𝔊(t))` over `t <= window`.
    pub min_margin: f64,
    pub gronwall_ok: bool,
    pub dev_rho_t: f64,
    pub dev_j_t: f64,
    pub max_mass_drift: f64,
}

/// Energy rows with the Gronwall envelope for the given constants.
pub fn energy_reports(
    record: &RunRecord,
    eps: f64,
    constants: &GronwallConstants,
) -> Result<Vec<EnergyReport>, CliError> {
    let Some(&(_, first)) = record.rows.first() else {
        return Ok(Vec::new());
    };
    record
        .rows
        .iter()
        .map(|(t, e)| {
            let rhs = gronwall_rhs(first.total, &record.history, eps, *t, constants).map_err(runtime)?;
            Ok(EnergyReport::new(*t, e, rhs))
        })
        .collect()
}

pub fn summarize(
    plan: &RunPlan,
    record: &RunRecord,
    reports: &[EnergyReport],
    constants: GronwallConstants,
    window: f64,
    run_id: String,
) -> RunSummary {
    let first = reports.first().copied();
    let last = reports.last().copied();
    let max_g = reports.iter().map(|r| r.total).fold(0.0, f64::max);
    let min_margin = reports
        .iter()
        .filter(|r| r.t <= window)
        .map(|r| r.gronwall_rhs - r.total)
        .fold(f64::INFINITY, f64::min);
    RunSummary {
        run_id,
        experiment: Experiment::HartreeRun.name().into(),
        seed: plan.seed,
        flow: plan.flow.label(),
        d: plan.grid.dim(),
        n: plan.grid.n(),
        hbar: plan.params.hbar,
        eps: plan.params.eps,
        packets_per_axis: plan.packets_per_axis,
        orbitals: plan.initial.len(),
        sigma: plan.sigma,
        t_end: plan.t_end,
        dt_rule: plan.dt_rule,
        report_every: plan.report_every,
        constants,
        window,
        g0: first.map_or(f64::NAN, |r| r.total),
        final_g: last.map_or(f64::NAN, |r| r.total),
        max_g,
        min_margin,
        gronwall_ok: min_margin >= 0.0,
        dev_rho_t: last.map_or(f64::NAN, |r| r.dev_rho),
        dev_j_t: last.map_or(f64::NAN, |r| r.dev_j),
        max_mass_drift: record.max_mass_drift,
    }
}

pub fn write_run(dir: &Path, reports: &[EnergyReport], summary: &RunSummary) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    artifacts::write_csv(&dir.join(ENERGY_CSV), reports)?;
    artifacts::write_json(&dir.join(SUMMARY_JSON), summary)
}

/// `hartree-run`: one Hartree integration with fixed Gronwall constants.
pub fn run_hartree(config: &RunConfig, out: &Path, seed: u64) -> Result<RunSummary, CliError> {
    config.check_experiment(Experiment::HartreeRun)?;
    config.check_gronwall()?;
    let params = config.params.ok_or_else(|| CliError::Config("missing [params] section".into()))?;
    let plan = plan(config, params.hbar, params.eps, seed)?;
    let clock = Instant::now();
    std::fs::create_dir_all(out)?;
    let record = simulate(&plan, Some(out)).map_err(|(_, e)| e)?;
    let constants = config.gronwall.constants();
    let window = config.gronwall.window.unwrap_or(plan.t_end);
    let reports = energy_reports(&record, plan.params.eps, &constants)?;
    let id = artifacts::run_id(Experiment::HartreeRun, config, seed);
    let summary = summarize(&plan, &record, &reports, constants, window, id);
    write_run(out, &reports, &summary)?;
    artifacts::write_timing(out, clock.elapsed().as_secs_f64())?;
    Ok(summary)
}
