use std::path::Path;
use std::time::Instant;

use qfluid::euler::{cfl_dt, flow_snapshot, state_snapshot, EulerStepper, FlowSnapshot, FlowState};
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, EULER_JSON, FLOW_CSV};
use crate::config::{Experiment, RunConfig};
use crate::error::{runtime, CliError};
use crate::run::{initial_flow, DT_SAFETY};

/// One row of `flow.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowRow {
    pub t: f64,
    pub energy: f64,
    pub enstrophy: f64,
    pub gradu_inf: f64,
    pub c11: f64,
}

impl From<&FlowSnapshot> for FlowRow {
    fn from(s: &FlowSnapshot) -> Self {
        Self {
            t: s.t,
            energy: s.energy(),
            enstrophy: s.enstrophy(),
            gradu_inf: s.gradu_inf,
            c11: s.c11,
        }
    }
}

/// `euler.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerSummary {
    pub run_id: String,
    pub seed: u64,
    pub flow: String,
    pub n: usize,
    pub t_end: f64,
    pub dt: f64,
    pub steps: usize,
    /// Relative drifts at `t_end`.
    pub energy_drift: f64,
    pub enstrophy_drift: f64,
    /// `max_t ‖ω(t) - ω(0)‖_∞` over report times.
    pub max_vorticity_change: f64,
}

/// `euler-test`: evolve the configured 2D flow and report its invariants.
pub fn run_euler_test(config: &RunConfig, out: &Path, seed: u64) -> Result<EulerSummary, CliError> {
    config.check_experiment(Experiment::EulerTest)?;
    let grid = config.grid_spec()?;
    if grid.dim() != 2 {
        return Err(CliError::Config("the Euler solver runs in 2D".into()));
    }
    let flow = config.flow_source()?;
    let time = config.time_section()?;
    let (u, omega) = initial_flow(grid, &flow, seed)?;
    let start = match omega {
        Some(w) => FlowState::new(w, 0.0),
        None => FlowState::from_velocity(&u, 0.0),
    }
    .map_err(CliError::from_config)?;
    let bound = (DT_SAFETY * cfl_dt(&u)).min(time.dt_max);
    let steps = if time.t_end == 0.0 { 0 } else { (time.t_end / bound * (1.0 - 1e-12)).ceil() as usize };
    let dt = if steps == 0 { bound } else { time.t_end / steps as f64 };
    let first = flow_snapshot(&u, 0.0).map_err(CliError::from_config)?;

    let clock = Instant::now();
    std::fs::create_dir_all(out)?;
    let mut stepper = EulerStepper::new(&start).map_err(runtime)?;
    let mut rows = vec![FlowRow::from(&first)];
    let mut max_change = 0.0f64;
    for step in 1..=steps {
        stepper.step(dt).map_err(runtime)?;
        if step % time.report_every == 0 || step == steps {
            let state = stepper.state();
            let change = state
                .omega()
                .zip_map(start.omega(), |a, b| a - b)
                .map_err(runtime)?
                .max_abs();
            max_change = max_change.max(change);
            let mut snap = state_snapshot(&state).map_err(runtime)?;
            snap.t = if step == steps { time.t_end } else { step as f64 * dt };
            rows.push(FlowRow::from(&snap));
        }
    }
    artifacts::write_csv(&out.join(FLOW_CSV), &rows)?;
    let (a, b) = (rows[0], rows[rows.len() - 1]);
    let rel = |x: f64, y: f64| if x == 0.0 { (y - x).abs() } else { ((y - x) / x).abs() };
    let summary = EulerSummary {
        run_id: artifacts::run_id(Experiment::EulerTest, config, seed),
        seed,
        flow: flow.label(),
        n: grid.n(),
        t_end: time.t_end,
        dt,
        steps,
        energy_drift: rel(a.energy, b.energy),
        enstrophy_drift: rel(a.enstrophy, b.enstrophy),
        max_vorticity_change: max_change,
    };
    artifacts::write_json(&out.join(EULER_JSON), &summary)?;
    artifacts::write_timing(out, clock.elapsed().as_secs_f64())?;
    Ok(summary)
}
