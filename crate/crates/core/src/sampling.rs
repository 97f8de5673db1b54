//! Exact sampling from a grid density through its trigonometric interpolant:
//! the first coordinate from its marginal, each further coordinate from its
//! conditional law, all by inverse-CDF.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coulomb::PointConfiguration;
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::spectral::TrigInterpolant;

/// Round-off allowance below zero for nodal density values.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-13;

/// RNG for draw `index` of a run seeded with `seed`: one ChaCha stream per
/// index, so draws do not depend on scheduling.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Debug)]
pub struct DensitySampler {
    dim: usize,
    modes: Vec<([i64; 3], Complex64)>,
}

impl DensitySampler {
    pub fn new(rho: &ScalarField) -> Result<Self> {
        let min = rho.min();
        if min < -NEGATIVITY_TOLERANCE || !rho.is_finite() {
            return Err(Error::NegativeDensity { min });
        }
        let mean = rho.mean();
        if (mean - 1.0).abs() > 1e-8 {
            return Err(Error::MeanNotOne { mean });
        }
        let interp = TrigInterpolant::from_field(rho);
        let modes = interp
            .modes()
            .iter()
            .map(|(k, c)| ([k[0] as i64, k[1] as i64, k[2] as i64], *c))
            .collect();
        Ok(Self {
            dim: rho.grid().dim(),
            modes,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// One point distributed with density `rho`.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> [f64; 3] {
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            // coefficients of the conditional law along `axis`, with later
            // axes integrated out
            let mut line: BTreeMap<i64, Complex64> = BTreeMap::new();
            for (k, c) in &self.modes {
                if k[axis + 1..self.dim].iter().any(|&v| v != 0) {
                    continue;
                }
                let phase: f64 = (0..axis).map(|a| k[a] as f64 * x[a]).sum::<f64>() * 2.0 * PI;
                *line.entry(k[axis]).or_insert(Complex64::new(0.0, 0.0)) +=
                    c * Complex64::from_polar(1.0, phase);
            }
            let coeffs: Vec<(f64, Complex64)> = line.into_iter().map(|(k, c)| (k as f64, c)).collect();
            let u: f64 = rng.gen();
            x[axis] = invert_cdf(&coeffs, u);
        }
        x
    }

    /// `n` i.i.d. points.
    pub fn sample_config<R: Rng>(&self, n: usize, rng: &mut R) -> Result<PointConfiguration> {
        let pts = (0..n).map(|_| self.sample_point(rng)).collect();
        PointConfiguration::new(self.dim, pts)
    }
}

/// `(F(x), f(x))` for `f(x) = Re Σ c_k e^{2πikx}` and `F(x) = ∫_0^x f`.
fn cdf_and_density(coeffs: &[(f64, Complex64)], x: f64) -> (f64, f64) {
    let mut big = 0.0;
    let mut small = 0.0;
    for &(k, c) in coeffs {
        if k == 0.0 {
            big += c.re * x;
            small += c.re;
        } else {
            let e = Complex64::from_polar(1.0, 2.0 * PI * k * x);
            small += (c * e).re;
            big += (c * (e - 1.0) / Complex64::new(0.0, 2.0 * PI * k)).re;
        }
    }
    (big, small)
}

/// Solve `F(x) = u F(1)` on `[0, 1)` by safeguarded Newton iteration.
fn invert_cdf(coeffs: &[(f64, Complex64)], u: f64) -> f64 {
    let total = cdf_and_density(coeffs, 1.0).0;
    let target = u * total;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x = u;
    for _ in 0..200 {
        let (cdf, dens) = cdf_and_density(coeffs, x);
        let g = cdf - target;
        if g.abs() <= 1e-15 * total.abs() {
            break;
        }
        if g > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo < 1e-16 {
            break;
        }
        let newton = x - g / dens;
        x = if dens > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    if x >= 1.0 {
        0.0
    } else {
        x.max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn uniform_density_gives_identity_map() {
        let g = GridSpec::new(2, 8).unwrap();
        let s = DensitySampler::new(&ScalarField::constant(g, 1.0)).unwrap();
        let coeffs = vec![(0.0, Complex64::new(1.0, 0.0))];
        assert!((invert_cdf(&coeffs, 0.37) - 0.37).abs() < 1e-15);
        let mut rng = stream_rng(7, 0);
        let p = s.sample_point(&mut rng);
        assert!(p[0] >= 0.0 && p[0] < 1.0 && p[1] >= 0.0 && p[1] < 1.0);
    }

    #[test]
    fn cosine_marginal_cdf() {
        // f = 1 + a cos 2πx, F = x + a sin(2πx)/(2π)
        let a = 0.5;
        let coeffs = vec![
            (-1.0, Complex64::new(a / 2.0, 0.0)),
            (0.0, Complex64::new(1.0, 0.0)),
            (1.0, Complex64::new(a / 2.0, 0.0)),
        ];
        for u in [0.01, 0.2, 0.5, 0.77, 0.99] {
            let x = invert_cdf(&coeffs, u);
            let f = x + a * (2.0 * PI * x).sin() / (2.0 * PI);
            assert!((f - u).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_negative_density_and_is_reproducible() {
        let g = GridSpec::new(2, 16).unwrap();
        let bad = ScalarField::from_fn(g, |x| 1.0 + 1.5 * (2.0 * PI * x[0]).cos());
        assert!(matches!(DensitySampler::new(&bad), Err(Error::NegativeDensity { .. })));
        let rho = ScalarField::from_fn(g, |x| 1.0 + 0.5 * (2.0 * PI * x[1]).sin());
        let s = DensitySampler::new(&rho).unwrap();
        let a = s.sample_config(10, &mut stream_rng(3, 5)).unwrap();
        let b = s.sample_config(10, &mut stream_rng(3, 5)).unwrap();
        let c = s.sample_config(10, &mut stream_rng(3, 6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
