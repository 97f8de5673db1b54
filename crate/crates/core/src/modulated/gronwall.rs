use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler::FlowSnapshot;

/// Flow norms entering the Gronwall bound at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub t: f64,
    pub gradu_inf: f64,
    pub c11: f64,
}

impl From<&FlowSnapshot> for FlowSample {
    fn from(s: &FlowSnapshot) -> Self {
        Self {
            t: s.t,
            gradu_inf: s.gradu_inf,
            c11: s.c11,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GronwallConstants {
    pub c_d: f64,
    pub c_d_alpha: f64,
}

/// Trapezoidal integrals `(∫₀ᵗ (1 + ‖∇u‖_∞), ∫₀ᵗ c11⁶)`.
fn integrals(history: &[FlowSample], t: f64) -> Result<(f64, f64)> {
    if history.is_empty() || history[0].t > 0.0 || history.last().map(|s| s.t).unwrap_or(0.0) < t {
        return Err(Error::EmptyHistory);
    }
    if history.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::InvalidParameter("flow history times must increase".into()));
    }
    let f = |s: &FlowSample| (1.0 + s.gradu_inf, s.c11.powi(6));
    let (mut a, mut b) = (0.0, 0.0);
    for w in history.windows(2) {
        let (s0, s1) = (&w[0], &w[1]);
        if s0.t >= t {
            break;
        }
        let (f0, g0) = f(s0);
        let (mut f1, mut g1) = f(s1);
        let mut t1 = s1.t;
        if t1 > t {
            let theta = (t - s0.t) / (s1.t - s0.t);
            f1 = f0 + theta * (f1 - f0);
            g1 = g0 + theta * (g1 - g0);
            t1 = t;
        }
        let h = t1 - s0.t;
        a += 0.5 * h * (f0 + f1);
        b += 0.5 * h * (g0 + g1);
    }
    Ok((a, b))
}

/// `(g0 + C_{d,α} ε² ∫₀ᵗ c11⁶) exp(C_d ∫₀ᵗ (1 + ‖∇u‖_∞))`.
pub fn gronwall_rhs(
    g0: f64,
    history: &[FlowSample],
    eps: f64,
    t: f64,
    constants: &GronwallConstants,
) -> Result<f64> {
    if !(eps >= 0.0) || !(t >= 0.0) {
        return Err(Error::InvalidParameter("eps and t must be nonnegative".into()));
    }
    let (a, b) = integrals(history, t)?;
    Ok((g0 + constants.c_d_alpha * eps * eps * b) * (constants.c_d * a).exp())
}

/// Constants fitted to one energy series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallFit {
    pub constants: GronwallConstants,
    /// Mean of `log(rhs/𝔊)` over the fitted series.
    pub mean_log_margin: f64,
}

/// Fit `(C_d, C_{d,α})` to a series `(t, 𝔊(t))` starting at `t = 0`.
///
/// For each `C_d` in `c_d_grid` the smallest `C_{d,α}` with `rhs >= 𝔊` at
/// every sample follows in closed form; the pair with the smallest mean
/// log-margin wins.
pub fn fit_constants(
    series: &[(f64, f64)],
    history: &[FlowSample],
    eps: f64,
    c_d_grid: &[f64],
) -> Result<GronwallFit> {
    let Some(&(t0, g0)) = series.first() else {
        return Err(Error::EmptyHistory);
    };
    if t0 != 0.0 {
        return Err(Error::InvalidParameter("energy series must start at t = 0".into()));
    }
    if c_d_grid.is_empty() {
        return Err(Error::InvalidParameter("empty C_d grid".into()));
    }
    let pre: Vec<(f64, f64, f64)> = series
        .iter()
        .map(|&(t, g)| integrals(history, t).map(|(a, b)| (a, b, g)))
        .collect::<Result<_>>()?;
    let mut best: Option<GronwallFit> = None;
    for &c_d in c_d_grid {
        let mut c_da = 0.0f64;
        let mut feasible = true;
        for &(a, b, g) in &pre {
            let need = g / (c_d * a).exp() - g0;
            if need > 0.0 {
                if b * eps * eps > 0.0 {
                    c_da = c_da.max(need / (b * eps * eps));
                } else {
                    feasible = false;
                }
            }
        }
        if !feasible {
            continue;
        }
        let constants = GronwallConstants { c_d, c_d_alpha: c_da };
        let logs: Vec<f64> = pre
            .iter()
            .filter(|p| p.2 > 0.0)
            .map(|&(a, b, g)| ((g0 + c_da * eps * eps * b) * (c_d * a).exp() / g).ln())
            .collect();
        let mean = if logs.is_empty() { 0.0 } else { logs.iter().sum::<f64>() / logs.len() as f64 };
        if best.map_or(true, |b| mean < b.mean_log_margin) {
            best = Some(GronwallFit {
                constants,
                mean_log_margin: mean,
            });
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("no feasible Gronwall constants".into()))
}
