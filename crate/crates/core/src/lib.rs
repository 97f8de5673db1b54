//! Spectral solvers and modulated-energy diagnostics for mean-field quantum
//! dynamics on the periodic torus in its joint semiclassical and quasineutral
//! regime.
//!
//! The building blocks are:
//!
//! * [`grid`] and [`spectral`]: periodic fields and pseudo-spectral calculus.
//! * [`coulomb`]: the periodic Coulomb kernel, point configurations and the
//!   discrete interaction energy `F_N`.
//! * [`euler`]: the incompressible Euler solver and its derived fields.
//! * [`hartree`]: split-step propagation of mixed states.
//! * [`wkb`]: Gaussian wave-packet initial data.
//! * [`modulated`]: the modulated energy and its error budget.

pub mod container;
pub mod coulomb;
pub mod error;
pub mod euler;
mod fft;
pub mod grid;
pub mod hartree;
pub mod modulated;
pub mod sampling;
pub mod spectral;
pub mod wkb;

pub use error::{Error, Result};
pub use grid::{ComplexField, GridSpec, ScalarField, VectorField};
