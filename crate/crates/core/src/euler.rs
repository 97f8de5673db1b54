//! Incompressible Euler flows on the torus and the fields derived from them.
//!
//! In 2D the solver evolves the vorticity `ω = ∂₁u² - ∂₂u¹` with a dealiased
//! pseudo-spectral RK4 scheme; velocities follow from `u = ∇^⊥ψ = (∂₂ψ, -∂₁ψ)`,
//! `-Δψ = ω`. In 3D only prescribed stationary flows are available.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{transform_in_place, Direction};
use crate::grid::{GridSpec, ScalarField, VectorField};
use crate::sampling::stream_rng;
use crate::spectral::{
    self, dealiased_product, derivative_multiplier, is_dealiased_mode, SpectralCoeffs,
};

const TWO_PI: f64 = 2.0 * PI;

/// Largest admissible `dt ‖u‖_∞ / h`.
pub const CFL_LIMIT: f64 = 0.5;

/// Absolute divergence tolerance accepted by the derived-field operators.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-8;

/// Vorticity and time of a 2D flow.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    omega: ScalarField,
    t: f64,
}

impl FlowState {
    pub fn new(omega: ScalarField, t: f64) -> Result<Self> {
        if omega.grid().dim() != 2 {
            return Err(Error::UnsupportedDimension(omega.grid().dim()));
        }
        spectral::check_mean_zero(omega.mean(), omega.max_abs())?;
        Ok(Self { omega, t })
    }

    /// State whose velocity is `u` (curl taken spectrally).
    pub fn from_velocity(u: &VectorField, t: f64) -> Result<Self> {
        Self::new(vorticity(u)?, t)
    }

    pub fn omega(&self) -> &ScalarField {
        &self.omega
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn velocity(&self) -> Result<VectorField> {
        velocity_from_vorticity(&self.omega)
    }

    /// `½ ∫ |u|²`.
    pub fn kinetic_energy(&self) -> Result<f64> {
        let u = self.velocity()?;
        Ok(0.5 * u.components().iter().map(|c| c.l2_norm().powi(2)).sum::<f64>())
    }

    /// `½ ∫ ω²`.
    pub fn enstrophy(&self) -> f64 {
        0.5 * self.omega.l2_norm().powi(2)
    }
}

/// `ω = ∂₁u² - ∂₂u¹` for a 2D field.
pub fn vorticity(u: &VectorField) -> Result<ScalarField> {
    if u.dim() != 2 {
        return Err(Error::UnsupportedDimension(u.dim()));
    }
    let a = spectral::partial(u.component(1), 0);
    let b = spectral::partial(u.component(0), 1);
    Ok(&a - &b)
}

/// Biot–Savart law with zero mean flow.
pub fn velocity_from_vorticity(omega: &ScalarField) -> Result<VectorField> {
    if omega.grid().dim() != 2 {
        return Err(Error::UnsupportedDimension(omega.grid().dim()));
    }
    spectral::check_mean_zero(omega.mean(), omega.max_abs())?;
    let psi = spectral::inverse_laplacian_coeffs(&spectral::transform(omega));
    let u1 = spectral::derivative_coeffs(&psi, 1).to_real();
    let u2 = spectral::derivative_coeffs(&psi, 0).to_real().scaled(-1.0);
    VectorField::new(vec![u1, u2])
}

/// Precomputed spectral multipliers for the vorticity equation.
struct Multipliers {
    d1: Vec<Complex64>,
    d2: Vec<Complex64>,
    inv_lap: Vec<f64>,
    keep: Vec<bool>,
}

impl Multipliers {
    fn new(grid: GridSpec) -> Self {
        let len = grid.len();
        let mut d1 = Vec::with_capacity(len);
        let mut d2 = Vec::with_capacity(len);
        let mut inv_lap = Vec::with_capacity(len);
        let mut keep = Vec::with_capacity(len);
        for i in 0..len {
            let k = grid.mode(i);
            d1.push(derivative_multiplier(grid, k, 0));
            d2.push(derivative_multiplier(grid, k, 1));
            let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
            inv_lap.push(if k2 == 0.0 { 0.0 } else { 1.0 / (4.0 * PI * PI * k2) });
            keep.push(is_dealiased_mode(grid, k) && k2 != 0.0);
        }
        Self {
            d1,
            d2,
            inv_lap,
            keep,
        }
    }
}

/// Dealiased `-(u·∇ω)^` and `‖u‖_∞` for vorticity coefficients `w`.
fn vorticity_rhs(grid: GridSpec, m: &Multipliers, w: &[Complex64]) -> (Vec<Complex64>, f64) {
    let len = w.len();
    let mut u1 = vec![Complex64::new(0.0, 0.0); len];
    let mut u2 = u1.clone();
    let mut wx = u1.clone();
    let mut wy = u1.clone();
    for i in 0..len {
        let psi = w[i] * m.inv_lap[i];
        u1[i] = m.d2[i] * psi;
        u2[i] = -m.d1[i] * psi;
        wx[i] = m.d1[i] * w[i];
        wy[i] = m.d2[i] * w[i];
    }
    for buf in [&mut u1, &mut u2, &mut wx, &mut wy] {
        transform_in_place(grid, buf, Direction::Inverse);
    }
    let mut umax = 0.0f64;
    let mut adv: Vec<Complex64> = (0..len)
        .map(|i| {
            let (a, b) = (u1[i].re, u2[i].re);
            umax = umax.max((a * a + b * b).sqrt());
            Complex64::new(a * wx[i].re + b * wy[i].re, 0.0)
        })
        .collect();
    transform_in_place(grid, &mut adv, Direction::Forward);
    for (i, v) in adv.iter_mut().enumerate() {
        *v = if m.keep[i] { -*v } else { Complex64::new(0.0, 0.0) };
    }
    (adv, umax)
}

/// One RK4 step of the dealiased vorticity equation `∂ₜω + u·∇ω = 0`.
pub fn euler_step(state: &FlowState, dt: f64) -> Result<FlowState> {
    let mut s = EulerStepper::new(state)?;
    s.step(dt)?;
    Ok(s.state())
}

/// Repeated RK4 steps kept in spectral space.
pub struct EulerStepper {
    grid: GridSpec,
    mult: Multipliers,
    w: Vec<Complex64>,
    t: f64,
}

impl EulerStepper {
    pub fn new(state: &FlowState) -> Result<Self> {
        let grid = state.omega.grid();
        if grid.dim() != 2 {
            return Err(Error::UnsupportedDimension(grid.dim()));
        }
        Ok(Self {
            grid,
            mult: Multipliers::new(grid),
            w: SpectralCoeffs::from_real(&state.omega).into_raw(),
            t: state.t,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn step(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let (k1, umax) = vorticity_rhs(self.grid, &self.mult, &self.w);
        let courant = dt * umax / self.grid.spacing();
        if courant > CFL_LIMIT {
            return Err(Error::CflViolation { courant });
        }
        let stage = |k: &[Complex64], c: f64| -> Vec<Complex64> {
            self.w.iter().zip(k).map(|(w, k)| w + k * c).collect()
        };
        let (k2, _) = vorticity_rhs(self.grid, &self.mult, &stage(&k1, dt / 2.0));
        let (k3, _) = vorticity_rhs(self.grid, &self.mult, &stage(&k2, dt / 2.0));
        let (k4, _) = vorticity_rhs(self.grid, &self.mult, &stage(&k3, dt));
        for i in 0..self.w.len() {
            self.w[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
        }
        self.t += dt;
        Ok(())
    }

    pub fn state(&self) -> FlowState {
        let omega = SpectralCoeffs::from_raw(self.grid, self.w.clone())
            .expect("length preserved")
            .to_real();
        FlowState { omega, t: self.t }
    }
}

/// Largest `dt` allowed by the CFL limit for velocity `u`.
pub fn cfl_dt(u: &VectorField) -> f64 {
    let umax = u.max_norm();
    if umax == 0.0 {
        f64::INFINITY
    } else {
        CFL_LIMIT * u.grid().spacing() / umax
    }
}

/// `∇u` as `g[α][β] = ∂_α u^β`.
pub fn velocity_gradient(u: &VectorField) -> Vec<Vec<ScalarField>> {
    let d = u.dim();
    let coeffs: Vec<SpectralCoeffs> = u.components().iter().map(spectral::transform).collect();
    (0..d)
        .map(|a| {
            (0..d)
                .map(|b| spectral::derivative_coeffs(&coeffs[b], a).to_real())
                .collect()
        })
        .collect()
}

fn check_divergence_free(u: &VectorField) -> Result<()> {
    let div = spectral::divergence(u);
    let max_divergence = div.max_abs();
    if max_divergence > DIVERGENCE_TOLERANCE {
        return Err(Error::NotDivergenceFree { max_divergence });
    }
    Ok(())
}

fn corrector_from_gradient(g: &[Vec<ScalarField>]) -> Result<ScalarField> {
    let d = g.len();
    let grid = g[0][0].grid();
    let mut acc = ScalarField::zeros(grid);
    for a in 0..d {
        for b in 0..d {
            acc = &acc + &dealiased_product(&g[a][b], &g[b][a])?;
        }
    }
    Ok(acc)
}

pub(crate) fn gradient_sup(g: &[Vec<ScalarField>]) -> f64 {
    let grid = g[0][0].grid();
    (0..grid.len())
        .map(|i| {
            g.iter()
                .flat_map(|row| row.iter().map(move |f| f.values()[i].powi(2)))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Corrector `𝔘 = Σ_{α,β} ∂_α u^β ∂_β u^α`, dealiased.
pub fn corrector_field(u: &VectorField) -> Result<ScalarField> {
    check_divergence_free(u)?;
    corrector_from_gradient(&velocity_gradient(u))
}

/// Mean-zero `p` with `-Δp = 𝔘`.
pub fn pressure_field(u: &VectorField) -> Result<ScalarField> {
    let g = velocity_gradient(u);
    check_divergence_free(u)?;
    let corr = corrector_from_gradient(&g)?;
    let scale = gradient_sup(&g).powi(2);
    spectral::inverse_laplacian_with_scale(&corr, scale)
}

/// `u·∇u`, dealiased, componentwise.
fn advection(u: &VectorField, g: &[Vec<ScalarField>]) -> Result<VectorField> {
    let d = u.dim();
    let grid = u.grid();
    let mut comps = Vec::with_capacity(d);
    for a in 0..d {
        let mut acc = ScalarField::zeros(grid);
        for b in 0..d {
            acc = &acc + &dealiased_product(u.component(b), &g[b][a])?;
        }
        comps.push(acc);
    }
    VectorField::new(comps)
}

/// `∂ₜu = -(u·∇u + ∇p)` for the Euler flow through `u`.
pub fn velocity_time_derivative(u: &VectorField) -> Result<VectorField> {
    let g = velocity_gradient(u);
    check_divergence_free(u)?;
    velocity_time_derivative_with(u, &g)
}

fn velocity_time_derivative_with(u: &VectorField, g: &[Vec<ScalarField>]) -> Result<VectorField> {
    let corr = corrector_from_gradient(g)?;
    let p = spectral::inverse_laplacian_with_scale(&corr, gradient_sup(g).powi(2))?;
    let grad_p = spectral::gradient(&p);
    advection(u, g)?.add(&grad_p).map(|v| v.scaled(-1.0))
}

/// `∂ₜ𝔘 = 2 Σ ∂_α(∂ₜu)^β ∂_β u^α`.
fn corrector_time_derivative(g: &[Vec<ScalarField>], dtu: &VectorField) -> Result<ScalarField> {
    let dg = velocity_gradient(dtu);
    let d = g.len();
    let mut acc = ScalarField::zeros(dtu.grid());
    for a in 0..d {
        for b in 0..d {
            acc = &acc + &dealiased_product(&dg[a][b], &g[b][a])?;
        }
    }
    Ok(acc.scaled(2.0))
}

/// `∂ₜp`, solving `-Δ(∂ₜp) = ∂ₜ𝔘`.
pub fn pressure_time_derivative(u: &VectorField) -> Result<ScalarField> {
    let g = velocity_gradient(u);
    check_divergence_free(u)?;
    let dtu = velocity_time_derivative_with(u, &g)?;
    let rhs = corrector_time_derivative(&g, &dtu)?;
    spectral::inverse_laplacian_with_scale(&rhs, gradient_sup(&g) * dtu_scale(&dtu))
}

fn dtu_scale(dtu: &VectorField) -> f64 {
    let g = velocity_gradient(dtu);
    gradient_sup(&g)
}

/// `div (-Δ)^{-1} w`.
pub fn aux_from_flux(w: &VectorField) -> ScalarField {
    spectral::div_inverse_laplacian(w)
}

/// `A = div (-Δ)^{-1}(u 𝔘)` with the products dealiased.
pub fn aux_transport_field(u: &VectorField) -> Result<ScalarField> {
    let corr = corrector_field(u)?;
    aux_with(u, &corr)
}

fn aux_with(u: &VectorField, corr: &ScalarField) -> Result<ScalarField> {
    let comps = u
        .components()
        .iter()
        .map(|c| dealiased_product(c, corr))
        .collect::<Result<Vec<_>>>()?;
    Ok(aux_from_flux(&VectorField::new(comps)?))
}

/// Euler-side ingredients of the modulated energy at one time.
#[derive(Clone, Debug)]
pub struct FlowSnapshot {
    pub t: f64,
    pub u: VectorField,
    /// `gradu[α][β] = ∂_α u^β`
    pub gradu: Vec<Vec<ScalarField>>,
    pub corrector: ScalarField,
    pub pressure: ScalarField,
    pub dtp: ScalarField,
    pub aux: ScalarField,
    /// `sup_x |∇u(x)|` (Frobenius)
    pub gradu_inf: f64,
    /// `‖u‖_∞ + ‖∇u‖_∞ + ‖∇²u‖_∞`
    pub c11: f64,
}

impl FlowSnapshot {
    pub fn grid(&self) -> GridSpec {
        self.u.grid()
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    /// `½ ∫ |u|²`.
    pub fn energy(&self) -> f64 {
        0.5 * self.u.components().iter().map(|c| c.l2_norm().powi(2)).sum::<f64>()
    }

    /// `½ ∫ ω²` in 2D, `½ ∫ |∇u|²` in 3D (equal for divergence-free fields).
    pub fn enstrophy(&self) -> f64 {
        0.5 * self
            .gradu
            .iter()
            .flat_map(|row| row.iter().map(|f| f.l2_norm().powi(2)))
            .sum::<f64>()
    }
}

/// All derived fields of the flow through `u` at time `t`.
pub fn flow_snapshot(u: &VectorField, t: f64) -> Result<FlowSnapshot> {
    check_divergence_free(u)?;
    let gradu = velocity_gradient(u);
    let gsup = gradient_sup(&gradu);
    let corrector = corrector_from_gradient(&gradu)?;
    let pressure = spectral::inverse_laplacian_with_scale(&corrector, gsup * gsup)?;
    let dtu = velocity_time_derivative_with(u, &gradu)?;
    let dcorr = corrector_time_derivative(&gradu, &dtu)?;
    let dtp = spectral::inverse_laplacian_with_scale(&dcorr, gsup * dtu_scale(&dtu))?;
    let aux = aux_with(u, &corrector)?;

    let hessian: Vec<Vec<ScalarField>> = gradu
        .iter()
        .flat_map(|row| row.iter().map(|f| spectral::gradient(f).into_components()))
        .collect();
    let hess_sup = (0..u.grid().len())
        .map(|i| {
            hessian
                .iter()
                .flat_map(|row| row.iter().map(move |f| f.values()[i].powi(2)))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    let c11 = u.max_norm() + gsup + hess_sup;
    Ok(FlowSnapshot {
        t,
        u: u.clone(),
        gradu,
        corrector,
        pressure,
        dtp,
        aux,
        gradu_inf: gsup,
        c11,
    })
}

/// Snapshot of a 2D flow state.
pub fn state_snapshot(state: &FlowState) -> Result<FlowSnapshot> {
    flow_snapshot(&state.velocity()?, state.t)
}

/// Named stationary flows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalyticFlow {
    /// `u = (sin 2πx₂, 0)`
    #[serde(rename = "shear-2d")]
    Shear2d,
    /// `u = ∇^⊥ψ`, `ψ = sin 2πx₁ sin 2πx₂ / (2π)`
    #[serde(rename = "taylor-green-2d")]
    TaylorGreen2d,
    /// `u = (sin 2πx₃, 0, 0)`
    #[serde(rename = "shear-3d")]
    Shear3d,
    /// `u = 0` in any dimension
    Zero,
}

impl AnalyticFlow {
    pub fn name(&self) -> &'static str {
        match self {
            AnalyticFlow::Shear2d => "shear-2d",
            AnalyticFlow::TaylorGreen2d => "taylor-green-2d",
            AnalyticFlow::Shear3d => "shear-3d",
            AnalyticFlow::Zero => "zero",
        }
    }

    /// Dimension the flow lives in (`None` for the zero flow).
    pub fn dim(&self) -> Option<usize> {
        match self {
            AnalyticFlow::Shear2d | AnalyticFlow::TaylorGreen2d => Some(2),
            AnalyticFlow::Shear3d => Some(3),
            AnalyticFlow::Zero => None,
        }
    }

    pub fn velocity(&self, grid: GridSpec) -> Result<VectorField> {
        if let Some(d) = self.dim() {
            if d != grid.dim() {
                return Err(Error::UnsupportedDimension(grid.dim()));
            }
        }
        Ok(match self {
            AnalyticFlow::Shear2d => {
                VectorField::from_fn(grid, |x| [(TWO_PI * x[1]).sin(), 0.0, 0.0])
            }
            AnalyticFlow::TaylorGreen2d => VectorField::from_fn(grid, |x| {
                let (s1, c1) = (TWO_PI * x[0]).sin_cos();
                let (s2, c2) = (TWO_PI * x[1]).sin_cos();
                [s1 * c2, -c1 * s2, 0.0]
            }),
            AnalyticFlow::Shear3d => {
                VectorField::from_fn(grid, |x| [(TWO_PI * x[2]).sin(), 0.0, 0.0])
            }
            AnalyticFlow::Zero => VectorField::zeros(grid),
        })
    }

    /// Stationary snapshot (all times share the same fields).
    pub fn snapshot(&self, grid: GridSpec, t: f64) -> Result<FlowSnapshot> {
        flow_snapshot(&self.velocity(grid)?, t)
    }
}

/// Smooth random 2D vorticity: modes `0 < |k|_∞ <= modes` with amplitudes
/// uniform in `[-1, 1]·|k|^{-2}` drawn from `stream_rng(seed, 0)`, rescaled
/// so that `‖u‖_∞ = amplitude`.
pub fn random_vorticity(grid: GridSpec, modes: i64, amplitude: f64, seed: u64) -> Result<ScalarField> {
    if grid.dim() != 2 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    if modes < 1 || modes > spectral::dealias_cutoff(grid.n()) {
        return Err(Error::InvalidParameter(format!(
            "random vorticity modes must lie in 1..={}",
            spectral::dealias_cutoff(grid.n())
        )));
    }
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidParameter("random flow amplitude must be positive".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let mut terms = Vec::new();
    for k1 in -modes..=modes {
        for k2 in 0..=modes {
            // one representative of each ±k pair
            if k2 == 0 && k1 <= 0 {
                continue;
            }
            let k2f = (k1 * k1 + k2 * k2) as f64;
            let a = rng.gen_range(-1.0..1.0) / k2f;
            let b = rng.gen_range(-1.0..1.0) / k2f;
            terms.push((k1 as f64, k2 as f64, a, b));
        }
    }
    let omega = ScalarField::from_fn(grid, |x| {
        terms
            .iter()
            .map(|&(k1, k2, a, b)| {
                let (s, c) = (TWO_PI * (k1 * x[0] + k2 * x[1])).sin_cos();
                a * c + b * s
            })
            .sum()
    });
    let umax = velocity_from_vorticity(&omega)?.max_norm();
    Ok(omega.scaled(amplitude / umax))
}

impl FromStr for AnalyticFlow {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shear-2d" => Ok(AnalyticFlow::Shear2d),
            "taylor-green-2d" => Ok(AnalyticFlow::TaylorGreen2d),
            "shear-3d" => Ok(AnalyticFlow::Shear3d),
            "zero" => Ok(AnalyticFlow::Zero),
            other => Err(Error::InvalidParameter(format!("unknown flow '{other}'"))),
        }
    }
}
