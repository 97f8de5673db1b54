//! Gaussian wave packets and monokinetic packet mixtures used as initial data.
//!
//! A packet is built in Fourier space,
//! `φ̂(k) ∝ exp(-4π²σ²|k - k₀|²) e^{-2πi k·x₀}` with `k₀ = v₀/(2πħ)`, which is the
//! periodization of `exp(-|x-x₀|²/(4σ²) + i v₀·(x-x₀)/ħ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{transform_in_place, Direction};
use crate::grid::{ComplexField, GridSpec, ScalarField, VectorField};
use crate::hartree::{MixedState, PhysicalParams};
use crate::spectral::TrigInterpolant;

/// Largest packet width accepted.
pub const MAX_SIGMA: f64 = 0.25;

/// Spectral half-width of a packet in units of `1/(2πσ)`: the envelope
/// `exp(-4π²σ²q²)` is below `1e-10` beyond it.
pub const SPECTRAL_REACH: f64 = 4.8;

/// Floor applied to the default initial density.
pub const DENSITY_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    pub center: [f64; 3],
    pub momentum: [f64; 3],
    pub sigma: f64,
}

impl PacketSpec {
    pub fn new(center: [f64; 3], momentum: [f64; 3], sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= MAX_SIGMA) {
            return Err(Error::InvalidParameter(format!(
                "packet width must lie in (0, {MAX_SIGMA}], got {sigma}"
            )));
        }
        Ok(Self {
            center,
            momentum,
            sigma,
        })
    }

    /// Width with `σ² = ħ`.
    pub fn default_sigma(params: &PhysicalParams) -> f64 {
        params.hbar.sqrt()
    }
}

/// Largest wavenumber a packet occupies on each axis.
pub fn spectral_extent(spec: &PacketSpec, dim: usize, params: &PhysicalParams) -> f64 {
    let kmax = spec.momentum[..dim]
        .iter()
        .map(|v| (v / (2.0 * PI * params.hbar)).abs())
        .fold(0.0, f64::max);
    kmax + SPECTRAL_REACH / (2.0 * PI * spec.sigma)
}

/// Reject packets whose spectrum reaches past the Nyquist wavenumber.
pub fn check_resolution(spec: &PacketSpec, grid: GridSpec, params: &PhysicalParams) -> Result<()> {
    let extent = spectral_extent(spec, grid.dim(), params);
    let nyquist = (grid.n() / 2) as f64;
    if extent > nyquist {
        return Err(Error::ResolutionGuard(format!(
            "packet spectrum reaches wavenumber {extent:.1} but the grid resolves {nyquist}"
        )));
    }
    Ok(())
}

/// Unit-norm periodized Gaussian packet.
pub fn gaussian_packet(
    spec: &PacketSpec,
    grid: GridSpec,
    params: &PhysicalParams,
) -> Result<ComplexField> {
    check_resolution(spec, grid, params)?;
    let d = grid.dim();
    let mut k0 = [0.0; 3];
    for a in 0..d {
        k0[a] = spec.momentum[a] / (2.0 * PI * params.hbar);
    }
    let s2 = spec.sigma * spec.sigma;
    let mut coeffs: Vec<Complex64> = (0..grid.len())
        .map(|i| {
            let k = grid.mode(i);
            let mut q2 = 0.0;
            let mut phase = 0.0;
            for a in 0..d {
                let q = k[a] as f64 - k0[a];
                q2 += q * q;
                phase -= 2.0 * PI * k[a] as f64 * spec.center[a];
            }
            Complex64::from_polar((-4.0 * PI * PI * s2 * q2).exp(), phase)
        })
        .collect();
    let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in coeffs.iter_mut() {
        *c /= norm;
    }
    transform_in_place(grid, &mut coeffs, Direction::Inverse);
    ComplexField::new(grid, coeffs)
}

/// `1 + ε²𝔘⁰`, floored at [`DENSITY_FLOOR`] and renormalized to mean one.
pub fn default_density(corrector: &ScalarField, params: &PhysicalParams) -> ScalarField {
    let e2 = params.eps * params.eps;
    let rho = corrector.map(|c| (1.0 + e2 * c).max(DENSITY_FLOOR));
    let mean = rho.mean();
    rho.scaled(1.0 / mean)
}

/// Lattice points `j/m` in `[0,1)^d`.
pub fn lattice_points(dim: usize, m: usize) -> Vec<[f64; 3]> {
    (0..m.pow(dim as u32))
        .map(|i| {
            let mut p = [0.0; 3];
            let mut rest = i;
            for slot in p.iter_mut().take(dim) {
                *slot = (rest % m) as f64 / m as f64;
                rest /= m;
            }
            p
        })
        .collect()
}

/// Mixture of `m^d` packets at the lattice points `x_j = j/m`, with weights
/// proportional to `rho0(x_j)` and momenta `u0(x_j)`.
pub fn monokinetic_mixture(
    u0: &VectorField,
    rho0: &ScalarField,
    params: &PhysicalParams,
    m: usize,
    sigma: f64,
) -> Result<MixedState> {
    let grid = u0.grid();
    if rho0.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if m == 0 {
        return Err(Error::InvalidParameter("packets per axis must be positive".into()));
    }
    if !(rho0.min() > 0.0) {
        return Err(Error::NegativeDensity { min: rho0.min() });
    }
    let mean = rho0.mean();
    if (mean - 1.0).abs() > 1e-8 {
        return Err(Error::MeanNotOne { mean });
    }
    let d = grid.dim();
    let centers = lattice_points(d, m);
    let rho_i = TrigInterpolant::from_field(rho0);
    let u_i: Vec<TrigInterpolant> = u0.components().iter().map(TrigInterpolant::from_field).collect();
    let specs: Vec<PacketSpec> = centers
        .iter()
        .map(|&c| {
            let mut v = [0.0; 3];
            for (a, it) in u_i.iter().enumerate() {
                v[a] = it.eval(c);
            }
            PacketSpec::new(c, v, sigma)
        })
        .collect::<Result<_>>()?;
    for s in &specs {
        check_resolution(s, grid, params)?;
    }
    let raw: Vec<f64> = centers.iter().map(|&c| rho_i.eval(c).max(0.0)).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NegativeDensity { min: 0.0 });
    }
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let orbitals = specs
        .par_iter()
        .map(|s| gaussian_packet(s, grid, params))
        .collect::<Result<Vec<_>>>()?;
    MixedState::new(orbitals, weights)
}
