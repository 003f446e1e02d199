//! Steady states and dynamics of the periodic thin-film equation
//!
//! ```text
//! u_t + [f(u) (u_θθθ + α² u_θ − sin θ) + ω u]_θ = 0,   θ ∈ (−π, π)
//! ```
//!
//! The crate builds the unique nonnegative energy minimizer of a given mass
//! in closed form ([`steady_state`]), evaluates the energy and entropy
//! functionals ([`functionals`]), time-steps the regularized equation with a
//! conservative implicit scheme ([`evolution`]) and compares trajectories
//! against the known convergence bounds ([`analysis`]).

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod banded;
pub mod error;
pub mod evolution;
pub mod functionals;
pub mod grid;
pub mod integrate;
pub mod io;
pub mod steady_state;

pub use analysis::{BoundKind, RateReport};
pub use error::{Error, Result};
pub use evolution::{EvolutionConfig, Trajectory};
pub use functionals::{EnergyBreakdown, EntropyParams};
pub use grid::{PeriodicGrid, PeriodicGridFunction};
pub use steady_state::{ModelParams, Regime, SteadyState};
