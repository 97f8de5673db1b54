use std::path::{Path, PathBuf};

use qfluid::euler::AnalyticFlow;
use qfluid::modulated::{BenchKind, GronwallConstants};
use qfluid::wkb::MAX_SIGMA;
use qfluid::GridSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Experiment configuration as read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional guard: must match the subcommand when present.
    #[serde(default)]
    pub experiment: Option<String>,
    pub grid: GridSection,
    #[serde(default)]
    pub flow: Option<FlowSection>,
    #[serde(default)]
    pub params: Option<ParamsSection>,
    #[serde(default)]
    pub wkb: WkbSection,
    #[serde(default)]
    pub time: Option<TimeSection>,
    #[serde(default)]
    pub gronwall: GronwallSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub bench: Option<BenchSection>,
    #[serde(default)]
    pub mc: Option<McSection>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub d: usize,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    /// `shear-2d`, `taylor-green-2d`, `shear-3d`, `zero` or `random-2d`.
    #[serde(default)]
    pub name: Option<String>,
    /// Vorticity stored in the binary field container (2D).
    #[serde(default)]
    pub vorticity_file: Option<PathBuf>,
    /// Highest wavenumber of the `random-2d` vorticity.
    #[serde(default = "default_random_modes")]
    pub random_modes: i64,
    /// Target `‖u‖_∞` of the `random-2d` velocity.
    #[serde(default = "default_random_amplitude")]
    pub random_amplitude: f64,
}

fn default_random_modes() -> i64 {
    3
}

fn default_random_amplitude() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub hbar: f64,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaRule {
    Named(String),
    Value(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WkbSection {
    #[serde(default = "default_packets")]
    pub packets_per_axis: usize,
    #[serde(default = "default_sigma_rule")]
    pub sigma: SigmaRule,
}

fn default_packets() -> usize {
    12
}

fn default_sigma_rule() -> SigmaRule {
    SigmaRule::Named("sqrt-hbar".into())
}

impl Default for WkbSection {
    fn default() -> Self {
        Self {
            packets_per_axis: default_packets(),
            sigma: default_sigma_rule(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_end: f64,
    pub dt_max: f64,
    #[serde(default = "default_report_every")]
    pub report_every: usize,
    /// Field dump cadence in steps; 0 dumps only the final state.
    #[serde(default)]
    pub dump_every: usize,
}

fn default_report_every() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GronwallSection {
    #[serde(default = "one")]
    pub c_d: f64,
    #[serde(default = "one")]
    pub c_d_alpha: f64,
    /// Candidate `C_d` values for the sweep calibration fit.
    #[serde(default = "default_c_d_grid")]
    pub c_d_grid: Vec<f64>,
    /// Gronwall checks cover `t <= window` (default: the whole run).
    #[serde(default)]
    pub window: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn default_c_d_grid() -> Vec<f64> {
    (0..=100).map(|i| 0.05 * i as f64).collect()
}

impl Default for GronwallSection {
    fn default() -> Self {
        Self {
            c_d: 1.0,
            c_d_alpha: 1.0,
            c_d_grid: default_c_d_grid(),
            window: None,
        }
    }
}

impl GronwallSection {
    pub fn constants(&self) -> GronwallConstants {
        GronwallConstants {
            c_d: self.c_d,
            c_d_alpha: self.c_d_alpha,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepOuter {
    Hbar,
    Eps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub hbar: Vec<f64>,
    pub eps: Vec<f64>,
    #[serde(default = "default_outer")]
    pub outer: SweepOuter,
    /// Run whose series fixes the Gronwall constants; defaults to the
    /// largest `ħ` and `ε` of the lists.
    #[serde(default)]
    pub calibration: Option<ParamsSection>,
    /// `N` in the scaling diagnostic `(1 + log N·1_{d=2})/(ε² N^{2/d})`.
    #[serde(default = "default_particles")]
    pub n_particles: usize,
}

fn default_outer() -> SweepOuter {
    SweepOuter::Hbar
}

fn default_particles() -> usize {
    1024
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub n_points: Vec<usize>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    /// `seeds = base, base+1, ...` with `base` from `--seed`.
    #[serde(default)]
    pub seed_count: Option<usize>,
    #[serde(default = "all_kinds")]
    pub kinds: Vec<BenchKind>,
    /// Wavevector `k` of the coercivity test function `cos(2πk·x)`.
    #[serde(default = "default_test_mode")]
    pub test_mode: [i64; 3],
}

fn all_kinds() -> Vec<BenchKind> {
    vec![BenchKind::Commutator, BenchKind::Coercivity, BenchKind::LowerBound]
}

fn default_test_mode() -> [i64; 3] {
    [1, 0, 0]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    /// `ρ = 1 + amplitude·cos(2πk·x)`.
    pub amplitude: f64,
    pub mode: [i64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub n_points: usize,
    pub samples: usize,
    pub densities: Vec<DensitySpec>,
    #[serde(default)]
    pub check_doubling: bool,
}

/// Subcommands; each names the sections it needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    HartreeRun,
    Sweep,
    Bench,
    EulerTest,
    FnMc,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::HartreeRun => "hartree-run",
            Experiment::Sweep => "sweep",
            Experiment::Bench => "bench",
            Experiment::EulerTest => "euler-test",
            Experiment::FnMc => "fn-mc",
        }
    }
}

/// Where the flow comes from once the config is resolved.
#[derive(Clone, Debug, PartialEq)]
pub enum FlowSource {
    Analytic(AnalyticFlow),
    RandomVorticity { modes: i64, amplitude: f64 },
    VorticityFile(PathBuf),
}

impl FlowSource {
    pub fn label(&self) -> String {
        match self {
            FlowSource::Analytic(f) => f.name().to_string(),
            FlowSource::RandomVorticity { .. } => "random-2d".into(),
            FlowSource::VorticityFile(p) => format!("file:{}", p.display()),
        }
    }

    /// True when the flow must be evolved by the Euler solver.
    pub fn is_evolving(&self) -> bool {
        !matches!(self, FlowSource::Analytic(_))
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| config_error(e.to_string()))
    }

    /// Read and parse; relative vorticity paths resolve against the file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(flow) = cfg.flow.as_mut() {
            if let Some(file) = flow.vorticity_file.as_mut() {
                if file.is_relative() {
                    if let Some(dir) = path.parent() {
                        *file = dir.join(&*file);
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        GridSpec::new(self.grid.d, self.grid.n).map_err(CliError::from_config)
    }

    pub fn check_experiment(&self, exp: Experiment) -> Result<(), CliError> {
        match &self.experiment {
            Some(name) if name != exp.name() => Err(config_error(format!(
                "config declares experiment '{name}' but the subcommand is '{}'",
                exp.name()
            ))),
            _ => Ok(()),
        }
    }

    pub fn flow_source(&self) -> Result<FlowSource, CliError> {
        let flow = self.flow.as_ref().ok_or_else(|| config_error("missing [flow] section"))?;
        let d = self.grid.d;
        match (&flow.name, &flow.vorticity_file) {
            (Some(_), Some(_)) => Err(config_error("[flow] takes either name or vorticity_file, not both")),
            (None, None) => Err(config_error("[flow] needs name or vorticity_file")),
            (None, Some(file)) => {
                if d != 2 {
                    return Err(config_error("vorticity files describe 2D flows"));
                }
                Ok(FlowSource::VorticityFile(file.clone()))
            }
            (Some(name), None) if name == "random-2d" => {
                if d != 2 {
                    return Err(config_error("random-2d needs d = 2"));
                }
                if flow.random_modes < 1 || !(flow.random_amplitude > 0.0 && flow.random_amplitude.is_finite()) {
                    return Err(config_error("random-2d needs random_modes >= 1 and a positive amplitude"));
                }
                Ok(FlowSource::RandomVorticity {
                    modes: flow.random_modes,
                    amplitude: flow.random_amplitude,
                })
            }
            (Some(name), None) => {
                let f: AnalyticFlow = name.parse().map_err(CliError::from_config)?;
                if let Some(fd) = f.dim() {
                    if fd != d {
                        return Err(config_error(format!("flow {name} lives in {fd}D but the grid has d = {d}")));
                    }
                }
                Ok(FlowSource::Analytic(f))
            }
        }
    }

    pub fn time_section(&self) -> Result<TimeSection, CliError> {
        let t = self.time.ok_or_else(|| config_error("missing [time] section"))?;
        if !(t.t_end >= 0.0 && t.t_end.is_finite()) {
            return Err(config_error(format!("t_end must be finite and >= 0, got {}", t.t_end)));
        }
        if !(t.dt_max > 0.0 && t.dt_max.is_finite()) {
            return Err(config_error(format!("dt_max must be positive, got {}", t.dt_max)));
        }
        if t.report_every == 0 {
            return Err(config_error("report_every must be >= 1"));
        }
        Ok(t)
    }

    /// Packet width for `ħ`.
    pub fn sigma(&self, hbar: f64) -> Result<f64, CliError> {
        let s = match &self.wkb.sigma {
            SigmaRule::Named(n) if n == "sqrt-hbar" => hbar.sqrt(),
            SigmaRule::Named(n) => return Err(config_error(format!("unknown sigma rule '{n}'"))),
            SigmaRule::Value(v) => *v,
        };
        if !(s > 0.0 && s <= MAX_SIGMA) {
            return Err(config_error(format!("packet width {s} outside (0, {MAX_SIGMA}]")));
        }
        Ok(s)
    }

    pub fn check_gronwall(&self) -> Result<(), CliError> {
        let g = &self.gronwall;
        if !(g.c_d >= 0.0 && g.c_d_alpha >= 0.0 && g.c_d.is_finite() && g.c_d_alpha.is_finite()) {
            return Err(config_error("Gronwall constants must be finite and >= 0"));
        }
        if g.c_d_grid.is_empty() || g.c_d_grid.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(config_error("c_d_grid must be a nonempty list of finite values >= 0"));
        }
        if let Some(w) = g.window {
            if !(w >= 0.0) {
                return Err(config_error("Gronwall window must be >= 0"));
            }
        }
        Ok(())
    }
}
