//! The quantum modulated energy and the estimates built around it.

mod bench;
mod energy;
mod expectation;
mod gronwall;

pub use bench::{
    coercivity_bench, commutator_bench, lower_bound_constant, BenchKind, InequalityBenchReport,
};
pub use energy::{
    deviation_norms, kinetic_term, modulated_energy, potential_term, EnergyReport,
    ModulatedEnergy, DEVIATION_ORDER,
};
pub use expectation::{fn_expectation_closed_form, fn_expectation_monte_carlo, MonteCarloEstimate};
pub use gronwall::{
    fit_constants, gronwall_rhs, FlowSample, GronwallConstants, GronwallFit,
};
