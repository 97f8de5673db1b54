use serde::{Deserialize, Serialize};

use crate::coulomb::{error_scale, f_n, PointConfiguration, SignedMeasure};
use crate::error::{Error, Result};
use crate::euler::{gradient_sup, velocity_gradient};
use crate::grid::{ScalarField, VectorField};
use crate::spectral::{self, TrigInterpolant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchKind {
    Commutator,
    Coercivity,
    LowerBound,
}

impl BenchKind {
    pub fn name(&self) -> &'static str {
        match self {
            BenchKind::Commutator => "commutator",
            BenchKind::Coercivity => "coercivity",
            BenchKind::LowerBound => "lower-bound",
        }
    }
}

/// One inequality evaluation on one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalityBenchReport {
    pub kind: BenchKind,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub lhs: f64,
    pub f_n: f64,
    pub error_scale: f64,
    pub fitted_constant: f64,
}

/// Commutator estimate: `lhs = ∫∫_{x≠y} (v(x)-v(y))·∇V(x-y) d(μ_N-mu)⊗²` and
/// constant `|lhs| / (‖∇v‖_∞ (F_N + (1+‖mu‖_∞) e_N))`.
pub fn commutator_bench(
    config: &PointConfiguration,
    v: &VectorField,
    mu: &ScalarField,
    seed: u64,
) -> Result<InequalityBenchReport> {
    let n = config.len();
    let d = config.dim();
    let fval = f_n(config, mu)?;
    let lhs = SignedMeasure::empirical_minus(config.clone(), mu)?.commutator(v)?;
    let es = error_scale(d, n);
    let grad = gradient_sup(&velocity_gradient(v));
    let denom = grad * (fval + (1.0 + mu.max_abs()) * es);
    let fitted_constant = if lhs == 0.0 { 0.0 } else { lhs.abs() / denom };
    Ok(InequalityBenchReport {
        kind: BenchKind::Commutator,
        n,
        d,
        seed,
        lhs,
        f_n: fval,
        error_scale: es,
        fitted_constant,
    })
}

/// Coercivity estimate: `lhs = |∫φ d(μ_N - mu)|` and the smallest `C >= 0`
/// with `lhs <= C ‖∇φ‖_∞ N^{-1/d} + ‖∇φ‖_{L²} (F_N + C (1+‖mu‖_∞) e_N)^{1/2}`.
pub fn coercivity_bench(
    config: &PointConfiguration,
    phi: &ScalarField,
    mu: &ScalarField,
    seed: u64,
) -> Result<InequalityBenchReport> {
    phi.grid().check_same(&mu.grid())?;
    let n = config.len();
    let d = config.dim();
    let fval = f_n(config, mu)?;
    let interp = TrigInterpolant::from_field(phi);
    let atoms = config.points().iter().map(|&x| interp.eval(x)).sum::<f64>() / n as f64;
    let lhs = (atoms - phi.dot(mu)?).abs();
    let es = error_scale(d, n);
    let grad = spectral::gradient(phi);
    let sup = grad.max_norm();
    let l2 = grad.components().iter().map(|c| c.l2_norm().powi(2)).sum::<f64>().sqrt();
    let a = sup * (n as f64).powf(-1.0 / d as f64);
    let b = (1.0 + mu.max_abs()) * es;
    let fitted_constant = minimal_coercivity_constant(lhs, a, l2, fval, b)?;
    Ok(InequalityBenchReport {
        kind: BenchKind::Coercivity,
        n,
        d,
        seed,
        lhs,
        f_n: fval,
        error_scale: es,
        fitted_constant,
    })
}

fn minimal_coercivity_constant(lhs: f64, a: f64, l2: f64, f: f64, b: f64) -> Result<f64> {
    let rhs = |c: f64| c * a + l2 * (f + c * b).max(0.0).sqrt();
    let floor = if f < 0.0 { -f / b } else { 0.0 };
    if lhs <= rhs(floor) {
        return Ok(floor);
    }
    if a <= 0.0 && (l2 <= 0.0 || b <= 0.0) {
        return Err(Error::InvalidParameter("coercivity bound cannot grow with C".into()));
    }
    let mut hi = floor.max(1.0);
    while rhs(hi) < lhs {
        hi *= 2.0;
    }
    let mut lo = floor;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rhs(mid) >= lhs {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(hi)
}

/// Lower-bound constant `max(0, -F_N / e_N)` of one configuration.
pub fn lower_bound_constant(config: &PointConfiguration, mu: &ScalarField, seed: u64) -> Result<InequalityBenchReport> {
    let n = config.len();
    let d = config.dim();
    let fval = f_n(config, mu)?;
    let es = error_scale(d, n);
    Ok(InequalityBenchReport {
        kind: BenchKind::LowerBound,
        n,
        d,
        seed,
        lhs: fval,
        f_n: fval,
        error_scale: es,
        fitted_constant: (-fval / es).max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::f64::consts::PI;

    #[test]
    fn constant_test_functions_give_zero_lhs() {
        let g = GridSpec::new(2, 16).unwrap();
        let mu = ScalarField::constant(g, 1.0);
        let c = PointConfiguration::new(2, vec![[0.1, 0.3, 0.0], [0.7, 0.2, 0.0], [0.4, 0.9, 0.0]]).unwrap();
        let v = VectorField::constant(g, [0.3, -1.0, 0.0]);
        let r = commutator_bench(&c, &v, &mu, 0).unwrap();
        assert!(r.lhs.abs() < 1e-12, "{r:?}");
        let phi = ScalarField::constant(g, 2.5);
        let r = coercivity_bench(&c, &phi, &mu, 0).unwrap();
        assert!(r.lhs < 1e-14);
        assert_eq!(r.fitted_constant.max(0.0), r.fitted_constant);
    }

    #[test]
    fn lattice_quadrature_is_exact() {
        let g = GridSpec::new(2, 16).unwrap();
        let mu = ScalarField::constant(g, 1.0);
        let c = PointConfiguration::lattice(2, 8).unwrap();
        let phi = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos() + (6.0 * PI * x[1]).sin());
        let r = coercivity_bench(&c, &phi, &mu, 0).unwrap();
        assert!(r.lhs < 1e-14, "{r:?}");
    }

    #[test]
    fn minimal_constant_solves_the_bound() {
        let c = minimal_coercivity_constant(0.5, 0.1, 0.8, 0.01, 0.02).unwrap();
        let rhs = c * 0.1 + 0.8 * (0.01 + c * 0.02f64).sqrt();
        assert!((rhs - 0.5).abs() < 1e-12);
    }
}
