use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coulomb::{check_probability_mean, f_n};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::sampling::{stream_rng, DensitySampler};
use crate::spectral;

/// `E[F_N]` for `x_N ~ ρ^{⊗N}`:
/// `((N-1)/N) ∫(V∗ρ)ρ - 2 ∫(V∗mu)ρ + ∫(V∗mu)mu`.
pub fn fn_expectation_closed_form(rho: &ScalarField, mu: &ScalarField, n: usize) -> Result<f64> {
    rho.grid().check_same(&mu.grid())?;
    check_probability_mean(rho)?;
    check_probability_mean(mu)?;
    if n < 2 {
        return Err(Error::InvalidParameter("N must be at least 2".into()));
    }
    let r = spectral::transform(rho);
    let m = spectral::transform(mu);
    let rr = spectral::hminus1_inner_coeffs(&r, &r)?;
    let rm = spectral::hminus1_inner_coeffs(&r, &m)?;
    let mm = spectral::hminus1_inner_coeffs(&m, &m)?;
    let nf = n as f64;
    Ok((nf - 1.0) / nf * rr - 2.0 * rm + mm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Sample mean and standard error of `F_N` over `samples` independent draws
/// of `N` points from `rho`. Draw `s` uses its own RNG stream keyed by
/// `(seed, s)`; sums run in draw order.
pub fn fn_expectation_monte_carlo(
    rho: &ScalarField,
    mu: &ScalarField,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    rho.grid().check_same(&mu.grid())?;
    if samples < 2 {
        return Err(Error::InvalidParameter("at least two samples are required".into()));
    }
    check_probability_mean(mu)?;
    let sampler = DensitySampler::new(rho)?;
    let values: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, s);
            let config = sampler.sample_config(n, &mut rng)?;
            f_n(&config, mu)
        })
        .collect::<Result<_>>()?;
    let sf = samples as f64;
    let mean = values.iter().sum::<f64>() / sf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (sf - 1.0);
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / sf).sqrt(),
        samples,
    })
}
