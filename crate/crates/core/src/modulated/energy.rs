use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler::FlowSnapshot;
use crate::grid::{ScalarField, VectorField};
use crate::hartree::{MixedState, PhysicalParams};
use crate::spectral;

/// Sobolev order of the density and current deviation norms.
pub const DEVIATION_ORDER: f64 = -3.0;

/// `Σ_m w_m ∫ |(-iħ∇ - u) φ_m|²`.
pub fn kinetic_term(state: &MixedState, u: &VectorField, params: &PhysicalParams) -> Result<f64> {
    state.grid().check_same(&u.grid())?;
    Ok(state.current_and_mismatch(params, Some(u)).1)
}

/// `ε^{-2} ‖ρ - 1 - ε²𝔘‖²_{Ḣ^{-1}}`.
pub fn potential_term(
    rho: &ScalarField,
    snapshot: &FlowSnapshot,
    params: &PhysicalParams,
) -> Result<f64> {
    rho.grid().check_same(&snapshot.grid())?;
    let e2 = params.eps * params.eps;
    let residual = rho.zip_map(&snapshot.corrector, |r, c| r - 1.0 - e2 * c)?;
    let scale = rho.max_abs().max(e2 * snapshot.corrector.max_abs());
    spectral::check_mean_zero(residual.mean(), scale)?;
    Ok(spectral::hminus1_norm_unchecked(&residual).powi(2) / e2)
}

/// `(‖ρ - 1‖_{H^{-3}}, (Σ_α ‖J^α - u^α‖²_{H^{-3}})^{1/2})`.
pub fn deviation_norms(rho: &ScalarField, current: &VectorField, u: &VectorField) -> Result<(f64, f64)> {
    rho.grid().check_same(&u.grid())?;
    current.grid().check_same(&u.grid())?;
    let dev_rho = spectral::sobolev_norm(&rho.map(|r| r - 1.0), DEVIATION_ORDER);
    let mut sq = 0.0;
    for a in 0..u.dim() {
        let diff = current.component(a) - u.component(a);
        sq += spectral::sobolev_norm(&diff, DEVIATION_ORDER).powi(2);
    }
    Ok((dev_rho, sq.sqrt()))
}

/// Both terms of the modulated energy and the deviation norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulatedEnergy {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
    pub dev_rho: f64,
    pub dev_j: f64,
}

pub fn modulated_energy(
    state: &MixedState,
    snapshot: &FlowSnapshot,
    params: &PhysicalParams,
) -> Result<ModulatedEnergy> {
    if state.grid() != snapshot.grid() {
        return Err(Error::GridMismatch);
    }
    let rho = state.density();
    let (current, kinetic) = state.current_and_mismatch(params, Some(&snapshot.u));
    let potential = potential_term(&rho, snapshot, params)?;
    let (dev_rho, dev_j) = deviation_norms(&rho, &current, &snapshot.u)?;
    Ok(ModulatedEnergy {
        kinetic,
        potential,
        total: kinetic + potential,
        dev_rho,
        dev_j,
    })
}

/// One row of the energy time series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyReport {
    pub t: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
    pub gronwall_rhs: f64,
    pub dev_rho: f64,
    #[serde(rename = "dev_J")]
    pub dev_j: f64,
}

impl EnergyReport {
    pub const CSV_HEADER: &'static str = "t,kinetic,potential,total,gronwall_rhs,dev_rho,dev_J";

    pub fn new(t: f64, energy: &ModulatedEnergy, gronwall_rhs: f64) -> Self {
        Self {
            t,
            kinetic: energy.kinetic,
            potential: energy.potential,
            total: energy.total,
            gronwall_rhs,
            dev_rho: energy.dev_rho,
            dev_j: energy.dev_j,
        }
    }
}
