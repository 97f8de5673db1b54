//! Mixed-state Schrödinger–Poisson (Hartree) dynamics
//!
//! ```text
//! iħ ∂ₜφ_m = -(ħ²/2) Δφ_m + ε^{-2} (V∗ρ) φ_m,    ρ = Σ_m w_m |φ_m|²
//! ```
//!
//! propagated by potential–kinetic–potential Strang splitting.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container;
use crate::coulomb::convolve_kernel;
use crate::error::{Error, Result};
use crate::fft::{transform_in_place, Direction};
use crate::grid::{ComplexField, GridSpec, ScalarField, VectorField};
use crate::spectral;

/// Orbitals per block in density and current reductions.
const REDUCTION_BLOCK: usize = 8;

/// Tolerance on `|mean(ρ) - 1|` for the Hartree potential.
pub const DENSITY_MEAN_TOLERANCE: f64 = 1e-8;

/// Semiclassical and quasineutral parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub hbar: f64,
    pub eps: f64,
}

impl PhysicalParams {
    pub fn new(hbar: f64, eps: f64) -> Result<Self> {
        for (name, v) in [("hbar", hbar), ("eps", eps)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { hbar, eps })
    }

    /// Coupling `ε^{-2}`.
    #[inline]
    pub fn coupling(&self) -> f64 {
        1.0 / (self.eps * self.eps)
    }
}

/// Finite-rank density matrix `Σ_m w_m |φ_m⟩⟨φ_m|`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    orbitals: Vec<ComplexField>,
    weights: Vec<f64>,
}

impl MixedState {
    pub fn new(orbitals: Vec<ComplexField>, weights: Vec<f64>) -> Result<Self> {
        if orbitals.is_empty() {
            return Err(Error::InvalidParameter("a mixed state needs at least one orbital".into()));
        }
        if orbitals.len() != weights.len() {
            return Err(Error::InvalidParameter("one weight per orbital required".into()));
        }
        let grid = orbitals[0].grid();
        if orbitals.iter().any(|o| o.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        for (m, o) in orbitals.iter().enumerate() {
            let norm = o.l2_norm();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidParameter(format!("orbital {m} has norm {norm}")));
            }
        }
        Ok(Self { orbitals, weights })
    }

    /// Pure state with one orbital.
    pub fn pure(orbital: ComplexField) -> Result<Self> {
        Self::new(vec![orbital], vec![1.0])
    }

    pub fn grid(&self) -> GridSpec {
        self.orbitals[0].grid()
    }

    pub fn len(&self) -> usize {
        self.orbitals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbitals.is_empty()
    }

    pub fn orbitals(&self) -> &[ComplexField] {
        &self.orbitals
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `ρ = Σ w_m |φ_m|²`.
    pub fn density(&self) -> ScalarField {
        density_of(self.grid(), &self.orbitals, &self.weights)
    }

    /// `J = Σ w_m ħ Im(conj(φ_m) ∇φ_m)`.
    pub fn current(&self, params: &PhysicalParams) -> VectorField {
        self.current_and_mismatch(params, None).0
    }

    /// The current and, for `Some(u)`, `Σ w_m ∫ |(-iħ∇ - u) φ_m|²`, from one
    /// gradient evaluation per orbital.
    pub(crate) fn current_and_mismatch(
        &self,
        params: &PhysicalParams,
        u: Option<&VectorField>,
    ) -> (VectorField, f64) {
        let grid = self.grid();
        let d = grid.dim();
        let hbar = params.hbar;
        let blocks: Vec<(Vec<Vec<f64>>, f64)> = self
            .orbitals
            .par_chunks(REDUCTION_BLOCK)
            .zip(self.weights.par_chunks(REDUCTION_BLOCK))
            .map(|(orbs, ws)| {
                let mut acc = vec![vec![0.0; grid.len()]; d];
                let mut mismatch = 0.0;
                for (o, &w) in orbs.iter().zip(ws) {
                    let grad = spectral::gradient_complex(o);
                    let mut own = 0.0;
                    for (a, ga) in grad.iter().enumerate() {
                        for ((s, p), q) in acc[a].iter_mut().zip(o.values()).zip(ga.values()) {
                            *s += w * (p.conj() * q).im;
                        }
                        if let Some(u) = u {
                            let ua = u.component(a).values();
                            for ((q, p), v) in ga.values().iter().zip(o.values()).zip(ua) {
                                own += (Complex64::new(0.0, -hbar) * q - p * v).norm_sqr();
                            }
                        }
                    }
                    mismatch += w * own / grid.len() as f64;
                }
                (acc, mismatch)
            })
            .collect();
        let mut total = vec![vec![0.0; grid.len()]; d];
        let mut mismatch = 0.0;
        for (block, m) in blocks {
            mismatch += m;
            for (t, b) in total.iter_mut().zip(block) {
                for (x, y) in t.iter_mut().zip(b) {
                    *x += y;
                }
            }
        }
        let comps = total
            .into_iter()
            .map(|v| ScalarField::new(grid, v).expect("grid length").scaled(hbar))
            .collect();
        (VectorField::new(comps).expect("consistent grid"), mismatch)
    }

    /// Every orbital multiplied by the same unit phase.
    pub fn with_global_phase(&self, theta: f64) -> MixedState {
        let z = Complex64::from_polar(1.0, theta);
        MixedState {
            orbitals: self.orbitals.iter().map(|o| o.scaled(z)).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Store as a directory: `manifest.json` plus one `ELL1` file per orbital.
    pub fn write_dir(&self, dir: &Path, params: &PhysicalParams) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let files: Vec<String> = (0..self.len()).map(|m| format!("orbital_{m:04}.ell")).collect();
        for (o, f) in self.orbitals.iter().zip(&files) {
            container::write_complex(&dir.join(f), o)?;
        }
        let manifest = StateManifest {
            format: MANIFEST_FORMAT.to_string(),
            dim: self.grid().dim(),
            n: self.grid().n(),
            orbitals: self.len(),
            weights: self.weights.clone(),
            params: *params,
            files,
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<(MixedState, PhysicalParams)> {
        let text = std::fs::read_to_string(dir.join("manifest.json"))?;
        let manifest: StateManifest =
            serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(Error::Format(format!("unknown manifest format '{}'", manifest.format)));
        }
        if manifest.files.len() != manifest.orbitals || manifest.weights.len() != manifest.orbitals {
            return Err(Error::Format("manifest counts disagree".into()));
        }
        let grid = GridSpec::new(manifest.dim, manifest.n)?;
        let mut orbitals = Vec::with_capacity(manifest.orbitals);
        for f in &manifest.files {
            let o = container::read_complex(&dir.join(f))?;
            if o.grid() != grid {
                return Err(Error::GridMismatch);
            }
            orbitals.push(o);
        }
        let params = PhysicalParams::new(manifest.params.hbar, manifest.params.eps)?;
        Ok((MixedState::new(orbitals, manifest.weights)?, params))
    }
}

const MANIFEST_FORMAT: &str = "mixed-state/1";

/// `manifest.json` of a stored mixed state.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateManifest {
    pub format: String,
    pub dim: usize,
    pub n: usize,
    pub orbitals: usize,
    pub weights: Vec<f64>,
    pub params: PhysicalParams,
    pub files: Vec<String>,
}

fn density_of(grid: GridSpec, orbitals: &[ComplexField], weights: &[f64]) -> ScalarField {
    let blocks: Vec<Vec<f64>> = orbitals
        .par_chunks(REDUCTION_BLOCK)
        .zip(weights.par_chunks(REDUCTION_BLOCK))
        .map(|(orbs, ws)| {
            let mut acc = vec![0.0; grid.len()];
            for (o, &w) in orbs.iter().zip(ws) {
                for (s, v) in acc.iter_mut().zip(o.values()) {
                    *s += w * v.norm_sqr();
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; grid.len()];
    for b in blocks {
        for (t, v) in total.iter_mut().zip(b) {
            *t += v;
        }
    }
    ScalarField::new(grid, total).expect("grid length")
}

/// `ε^{-2} (V∗ρ)` for a density of mean one.
pub fn hartree_potential(rho: &ScalarField, params: &PhysicalParams) -> Result<ScalarField> {
    let mean = rho.mean();
    if !((mean - 1.0).abs() <= DENSITY_MEAN_TOLERANCE) {
        return Err(Error::MeanNotOne { mean });
    }
    Ok(convolve_kernel(rho).scaled(params.coupling()))
}

/// `Σ w_m (ħ²/2) ‖∇φ_m‖²` evaluated spectrally (all modes, including Nyquist).
pub fn kinetic_energy(state: &MixedState, params: &PhysicalParams) -> f64 {
    let grid = state.grid();
    let d = grid.dim();
    let k2: Vec<f64> = (0..grid.len())
        .map(|i| {
            let k = grid.mode(i);
            (0..d).map(|a| (k[a] * k[a]) as f64).sum::<f64>() * 4.0 * PI * PI
        })
        .collect();
    let per: Vec<f64> = state
        .orbitals
        .par_iter()
        .map(|o| {
            let c = spectral::SpectralCoeffs::from_complex(o);
            c.coeffs().iter().zip(&k2).map(|(v, k)| k * v.norm_sqr()).sum::<f64>()
        })
        .collect();
    let s: f64 = per.iter().zip(&state.weights).map(|(e, w)| e * w).sum();
    0.5 * params.hbar * params.hbar * s
}

/// `(1/(2ε²)) ∫ (V∗ρ) ρ = (1/(2ε²)) ‖ρ - 1‖²_{Ḣ^{-1}}`.
pub fn potential_energy(rho: &ScalarField, params: &PhysicalParams) -> f64 {
    0.5 * params.coupling() * spectral::hminus1_norm_unchecked(rho).powi(2)
}

/// Total mean-field energy.
pub fn total_energy(state: &MixedState, params: &PhysicalParams) -> f64 {
    kinetic_energy(state, params) + potential_energy(&state.density(), params)
}

/// Phase increment `‖V∗ρ‖_∞ dt / (ħ ε²)` of a full potential step.
pub fn phase_increment(potential: &ScalarField, params: &PhysicalParams, dt: f64) -> f64 {
    potential.max_abs() * dt / params.hbar
}

/// Largest `dt` allowed by the phase-resolution guard.
pub fn phase_dt(state: &MixedState, params: &PhysicalParams) -> Result<f64> {
    let pot = hartree_potential(&state.density(), params)?;
    let m = pot.max_abs();
    Ok(if m == 0.0 { f64::INFINITY } else { PI * params.hbar / m })
}

/// One Strang step.
pub fn strang_step(state: &MixedState, params: &PhysicalParams, dt: f64) -> Result<MixedState> {
    let mut s = HartreeStepper::new(state.clone(), *params)?;
    s.step(dt)?;
    Ok(s.into_state())
}

/// Repeated Strang steps reusing the density between steps.
#[derive(Clone, Debug)]
pub struct HartreeStepper {
    state: MixedState,
    params: PhysicalParams,
    density: ScalarField,
    potential: ScalarField,
    /// Freeze the density at 1 (free evolution).
    free: bool,
    kinetic_cache: Option<(f64, Vec<Complex64>)>,
}

impl HartreeStepper {
    pub fn new(state: MixedState, params: PhysicalParams) -> Result<Self> {
        let density = state.density();
        let potential = hartree_potential(&density, &params)?;
        Ok(Self {
            state,
            params,
            density,
            potential,
            free: false,
            kinetic_cache: None,
        })
    }

    /// Stepper that ignores the interaction (`ρ ≡ 1` injected).
    pub fn free(state: MixedState, params: PhysicalParams) -> Self {
        let grid = state.grid();
        Self {
            state,
            params,
            density: ScalarField::constant(grid, 1.0),
            potential: ScalarField::zeros(grid),
            free: true,
            kinetic_cache: None,
        }
    }

    pub fn state(&self) -> &MixedState {
        &self.state
    }

    pub fn into_state(self) -> MixedState {
        self.state
    }

    pub fn density(&self) -> &ScalarField {
        &self.density
    }

    pub fn potential(&self) -> &ScalarField {
        &self.potential
    }

    fn check_phase(&self, pot: &ScalarField, dt: f64) -> Result<()> {
        let phase = phase_increment(pot, &self.params, dt);
        if phase > PI {
            return Err(Error::PhaseResolution { phase });
        }
        Ok(())
    }

    fn kinetic_phases(&mut self, dt: f64) -> Vec<Complex64> {
        if let Some((cached_dt, phases)) = &self.kinetic_cache {
            if *cached_dt == dt {
                return phases.clone();
            }
        }
        let grid = self.state.grid();
        let d = grid.dim();
        let hbar = self.params.hbar;
        let phases: Vec<Complex64> = (0..grid.len())
            .map(|i| {
                let k = grid.mode(i);
                let k2 = (0..d).map(|a| (k[a] * k[a]) as f64).sum::<f64>() * 4.0 * PI * PI;
                Complex64::from_polar(1.0, -hbar * k2 * dt / 2.0)
            })
            .collect();
        self.kinetic_cache = Some((dt, phases.clone()));
        phases
    }

    pub fn step(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        self.check_phase(&self.potential, dt)?;
        let grid = self.state.grid();
        let kin = self.kinetic_phases(dt);
        let hbar = self.params.hbar;
        let half: Vec<Complex64> = self
            .potential
            .values()
            .iter()
            .map(|v| Complex64::from_polar(1.0, -v * dt / (2.0 * hbar)))
            .collect();

        let mut orbitals: Vec<Vec<Complex64>> = self
            .state
            .orbitals
            .par_iter()
            .map(|o| {
                let mut buf: Vec<Complex64> =
                    o.values().iter().zip(&half).map(|(p, h)| p * h).collect();
                transform_in_place(grid, &mut buf, Direction::Forward);
                for (c, k) in buf.iter_mut().zip(&kin) {
                    *c *= k;
                }
                transform_in_place(grid, &mut buf, Direction::Inverse);
                buf
            })
            .collect();

        let fields: Vec<ComplexField> = orbitals
            .iter()
            .map(|v| ComplexField::new(grid, v.clone()).expect("grid length"))
            .collect();
        let (density, potential) = if self.free {
            (self.density.clone(), self.potential.clone())
        } else {
            let rho = density_of(grid, &fields, &self.state.weights);
            let pot = hartree_potential(&rho, &self.params)?;
            (rho, pot)
        };
        self.check_phase(&potential, dt)?;
        let half2: Vec<Complex64> = potential
            .values()
            .iter()
            .map(|v| Complex64::from_polar(1.0, -v * dt / (2.0 * hbar)))
            .collect();
        orbitals.par_iter_mut().for_each(|o| {
            for (p, h) in o.iter_mut().zip(&half2) {
                *p *= h;
            }
        });
        self.state.orbitals = orbitals
            .into_iter()
            .map(|v| ComplexField::new(grid, v).expect("grid length"))
            .collect();
        self.density = density;
        self.potential = potential;
        Ok(())
    }
}
