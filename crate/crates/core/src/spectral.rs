//! Trigonometric calculus on the torus: transforms, derivatives, the inverse
//! Laplacian, 2/3-rule dealiasing and Sobolev-scale norms.
//!
//! Coefficients are normalized so that `c(0)` is the mean of the field and
//! `f(x) = Σ_k c(k) e^{2πi k·x}` reproduces the samples exactly.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{transform_in_place, Direction};
use crate::grid::{ComplexField, GridSpec, ScalarField, VectorField};

const TWO_PI: f64 = 2.0 * PI;

/// Relative tolerance (against `‖f‖_∞`) below which a mean counts as round-off.
pub const MEAN_ZERO_TOLERANCE: f64 = 1e-10;

/// Fourier coefficients of a field, stored in FFT slot order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoeffs {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralCoeffs {
    pub fn from_real(field: &ScalarField) -> Self {
        let mut coeffs: Vec<Complex64> = field
            .values()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        transform_in_place(field.grid(), &mut coeffs, Direction::Forward);
        Self {
            grid: field.grid(),
            coeffs,
        }
    }

    pub fn from_complex(field: &ComplexField) -> Self {
        let mut coeffs = field.values().to_vec();
        transform_in_place(field.grid(), &mut coeffs, Direction::Forward);
        Self {
            grid: field.grid(),
            coeffs,
        }
    }

    pub fn from_raw(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::Format("coefficient count does not match grid".into()));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_raw(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of wavevector `k` (components with `|k_i| <= n/2`).
    pub fn get(&self, k: [i64; 3]) -> Complex64 {
        self.coeffs[self.grid.mode_index(k)]
    }

    pub fn to_complex(&self) -> ComplexField {
        let mut values = self.coeffs.clone();
        transform_in_place(self.grid, &mut values, Direction::Inverse);
        ComplexField::new(self.grid, values).expect("length preserved")
    }

    /// Inverse transform keeping the real part (exact for Hermitian data).
    pub fn to_real(&self) -> ScalarField {
        let mut values = self.coeffs.clone();
        transform_in_place(self.grid, &mut values, Direction::Inverse);
        ScalarField::new(self.grid, values.into_iter().map(|v| v.re).collect())
            .expect("length preserved")
    }

    /// Apply `f(k, c)` to every coefficient.
    pub fn map_modes(&self, f: impl Fn([i64; 3], Complex64) -> Complex64) -> SpectralCoeffs {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| f(self.grid.mode(i), c))
            .collect();
        SpectralCoeffs {
            grid: self.grid,
            coeffs,
        }
    }

    /// `Σ_k |c(k)|^2`, i.e. the mean of `|f|^2` by Parseval.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn add(&self, other: &SpectralCoeffs) -> Result<SpectralCoeffs> {
        self.grid.check_same(&other.grid)?;
        Ok(SpectralCoeffs {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scaled(&self, factor: f64) -> SpectralCoeffs {
        SpectralCoeffs {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }
}

/// Forward transform of a real field.
pub fn transform(field: &ScalarField) -> SpectralCoeffs {
    SpectralCoeffs::from_real(field)
}

/// Inverse transform to a complex field.
pub fn inverse(coeffs: &SpectralCoeffs) -> ComplexField {
    coeffs.to_complex()
}

#[inline]
fn k_squared(k: [i64; 3], dim: usize) -> f64 {
    k[..dim].iter().map(|&c| (c * c) as f64).sum()
}

/// Multiplier `2πi k_axis`, zero on Nyquist-touching modes.
#[inline]
pub(crate) fn derivative_multiplier(grid: GridSpec, k: [i64; 3], axis: usize) -> Complex64 {
    if grid.touches_nyquist(k) {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(0.0, TWO_PI * k[axis] as f64)
    }
}

/// Spectral derivative along `axis`.
pub fn derivative_coeffs(coeffs: &SpectralCoeffs, axis: usize) -> SpectralCoeffs {
    let g = coeffs.grid();
    coeffs.map_modes(|k, c| c * derivative_multiplier(g, k, axis))
}

pub fn partial(field: &ScalarField, axis: usize) -> ScalarField {
    derivative_coeffs(&transform(field), axis).to_real()
}

/// `∇f`, exact for band-limited fields below Nyquist.
pub fn gradient(field: &ScalarField) -> VectorField {
    let c = transform(field);
    gradient_from_coeffs(&c)
}

pub fn gradient_from_coeffs(c: &SpectralCoeffs) -> VectorField {
    let comps = (0..c.grid().dim())
        .map(|a| derivative_coeffs(c, a).to_real())
        .collect();
    VectorField::new(comps).expect("consistent grid")
}

/// `∇ψ` for a complex field.
pub fn gradient_complex(field: &ComplexField) -> Vec<ComplexField> {
    let c = SpectralCoeffs::from_complex(field);
    (0..field.grid().dim())
        .map(|a| derivative_coeffs(&c, a).to_complex())
        .collect()
}

/// `div v`.
pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid();
    let mut acc = SpectralCoeffs::zeros(g);
    for a in 0..v.dim() {
        let d = derivative_coeffs(&transform(v.component(a)), a);
        for (s, t) in acc.coeffs_mut().iter_mut().zip(d.coeffs()) {
            *s += t;
        }
    }
    acc.to_real()
}

/// `Δf` with multiplier `-4π²|k|²` on every mode.
pub fn laplacian(field: &ScalarField) -> ScalarField {
    let d = field.grid().dim();
    transform(field)
        .map_modes(|k, c| c * (-4.0 * PI * PI * k_squared(k, d)))
        .to_real()
}

/// Check that `|mean(f)| <= tol * scale`.
pub fn check_mean_zero(mean: f64, scale: f64) -> Result<()> {
    let tolerance = MEAN_ZERO_TOLERANCE * scale;
    if mean.abs() > tolerance {
        Err(Error::NonZeroMean { mean, tolerance })
    } else {
        Ok(())
    }
}

/// Multiplier `1/(4π²|k|²)` with the zero mode dropped.
pub fn inverse_laplacian_coeffs(c: &SpectralCoeffs) -> SpectralCoeffs {
    let d = c.grid().dim();
    c.map_modes(|k, v| {
        let k2 = k_squared(k, d);
        if k2 == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            v / (4.0 * PI * PI * k2)
        }
    })
}

/// Mean-zero solution `u` of `-Δu = f` for a mean-zero source.
pub fn inverse_laplacian(field: &ScalarField) -> Result<ScalarField> {
    check_mean_zero(field.mean(), field.max_abs())?;
    Ok(inverse_laplacian_coeffs(&transform(field)).to_real())
}

/// Solve `-Δu = f` after removing the mean of `f`, checking it against a
/// caller-supplied magnitude. Used for sources that are mean-zero by
/// structure but whose sup norm may itself be at round-off level.
pub fn inverse_laplacian_with_scale(field: &ScalarField, scale: f64) -> Result<ScalarField> {
    check_mean_zero(field.mean(), scale.max(field.max_abs()))?;
    Ok(inverse_laplacian_coeffs(&transform(field)).to_real())
}

/// `div (-Δ)^{-1} v`, applied componentwise.
pub fn div_inverse_laplacian(v: &VectorField) -> ScalarField {
    let g = v.grid();
    let mut acc = SpectralCoeffs::zeros(g);
    for a in 0..v.dim() {
        let c = derivative_coeffs(&inverse_laplacian_coeffs(&transform(v.component(a))), a);
        for (s, t) in acc.coeffs_mut().iter_mut().zip(c.coeffs()) {
            *s += t;
        }
    }
    acc.to_real()
}

/// Largest wavenumber kept by the 2/3 rule.
#[inline]
pub fn dealias_cutoff(n: usize) -> i64 {
    (n / 3) as i64
}

#[inline]
pub(crate) fn is_dealiased_mode(grid: GridSpec, k: [i64; 3]) -> bool {
    let n = grid.n() as i64;
    k[..grid.dim()].iter().all(|c| 3 * c.abs() <= n)
}

/// Zero every coefficient with some `|k_i| > n/3`.
pub fn dealias(coeffs: &SpectralCoeffs) -> SpectralCoeffs {
    let g = coeffs.grid();
    coeffs.map_modes(|k, c| {
        if is_dealiased_mode(g, k) {
            c
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Product of the 2/3-truncations of `a` and `b`, truncated again: the exact
/// continuum product of the truncated inputs projected onto the kept modes.
pub fn dealiased_product(a: &ScalarField, b: &ScalarField) -> Result<ScalarField> {
    a.grid().check_same(&b.grid())?;
    let fa = dealias(&transform(a)).to_real();
    let fb = dealias(&transform(b)).to_real();
    let prod = fa.pointwise_mul(&fb)?;
    Ok(dealias(&transform(&prod)).to_real())
}

/// `(Σ_k ⟨2πk⟩^{2s} |c(k)|²)^{1/2}` with `⟨ξ⟩ = (1+|ξ|²)^{1/2}`.
pub fn sobolev_norm(field: &ScalarField, s: f64) -> f64 {
    sobolev_norm_coeffs(&transform(field), s)
}

pub fn sobolev_norm_coeffs(c: &SpectralCoeffs, s: f64) -> f64 {
    let g = c.grid();
    let d = g.dim();
    c.coeffs()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let k2 = k_squared(g.mode(i), d);
            (1.0 + 4.0 * PI * PI * k2).powf(s) * v.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// `Σ_{k≠0} a(k) conj(b(k)) / (4π²|k|²)`, real part.
pub fn hminus1_inner_coeffs(a: &SpectralCoeffs, b: &SpectralCoeffs) -> Result<f64> {
    a.grid().check_same(&b.grid())?;
    let g = a.grid();
    let d = g.dim();
    Ok(a.coeffs()
        .iter()
        .zip(b.coeffs())
        .enumerate()
        .map(|(i, (x, y))| {
            let k2 = k_squared(g.mode(i), d);
            if k2 == 0.0 {
                0.0
            } else {
                (x * y.conj()).re / (4.0 * PI * PI * k2)
            }
        })
        .sum())
}

/// Homogeneous `Ḣ^{-1}` norm of a mean-zero field.
pub fn hminus1_norm(field: &ScalarField) -> Result<f64> {
    check_mean_zero(field.mean(), field.max_abs())?;
    Ok(hminus1_norm_unchecked(field))
}

/// `Ḣ^{-1}` seminorm, ignoring the zero mode.
pub fn hminus1_norm_unchecked(field: &ScalarField) -> f64 {
    let c = transform(field);
    hminus1_inner_coeffs(&c, &c).expect("same grid").max(0.0).sqrt()
}

/// Off-grid evaluation of the trigonometric interpolant of a grid field by
/// direct summation over its (numerically) nonzero modes.
///
/// The Nyquist coefficient is split evenly between `±n/2` so that the
/// interpolant of real data is real.
#[derive(Clone, Debug)]
pub struct TrigInterpolant {
    dim: usize,
    modes: Vec<([f64; 3], Complex64)>,
}

impl TrigInterpolant {
    /// Modes with `|c| <= 1e-16 max|c|` are dropped.
    pub fn new(coeffs: &SpectralCoeffs) -> Self {
        let g = coeffs.grid();
        let half = (g.n() / 2) as i64;
        let cmax = coeffs.coeffs().iter().fold(0.0f64, |m, c| m.max(c.norm()));
        let floor = 1e-16 * cmax;
        let mut modes = Vec::new();
        for (i, &c) in coeffs.coeffs().iter().enumerate() {
            if c.norm() <= floor || c.norm() == 0.0 {
                continue;
            }
            let k = g.mode(i);
            // split every Nyquist axis symmetrically
            let nyq: Vec<usize> = (0..g.dim()).filter(|&a| k[a].abs() == half).collect();
            let copies = 1usize << nyq.len();
            let weight = 1.0 / copies as f64;
            for mask in 0..copies {
                let mut kk = [k[0] as f64, k[1] as f64, k[2] as f64];
                for (bit, &a) in nyq.iter().enumerate() {
                    kk[a] = if mask & (1 << bit) != 0 {
                        half as f64
                    } else {
                        -(half as f64)
                    };
                }
                modes.push((kk, c * weight));
            }
        }
        Self { dim: g.dim(), modes }
    }

    pub fn from_field(field: &ScalarField) -> Self {
        Self::new(&transform(field))
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Retained `(k, c)` pairs; Nyquist modes appear split into both signs.
    pub fn modes(&self) -> &[([f64; 3], Complex64)] {
        &self.modes
    }

    #[inline]
    fn phase(&self, k: &[f64; 3], x: [f64; 3]) -> f64 {
        TWO_PI * (0..self.dim).map(|a| k[a] * x[a]).sum::<f64>()
    }

    /// Real part of the interpolant at `x`.
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        self.modes
            .iter()
            .map(|(k, c)| {
                let (s, co) = self.phase(k, x).sin_cos();
                c.re * co - c.im * s
            })
            .sum()
    }

    /// Gradient of the real part at `x`.
    pub fn eval_gradient(&self, x: [f64; 3]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (k, c) in &self.modes {
            let (s, co) = self.phase(k, x).sin_cos();
            // d/dx Re(c e^{iθ}) = -2πk (c.re sin + c.im cos)
            let common = -(c.re * s + c.im * co) * TWO_PI;
            for a in 0..self.dim {
                g[a] += common * k[a];
            }
        }
        g
    }
}
