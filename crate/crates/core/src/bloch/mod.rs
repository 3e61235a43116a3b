//! Coherent-vector representation of the filter and the scenario-based
//! baseline controller built on it.

mod basis;
mod dynamics;
mod standard;
mod vector;

pub use basis::{generalized_gell_mann, structure_constants, StructureConstants, SuNBasis};
pub use dynamics::{bloch_multi_step, bloch_sme_step, build_superoperators, BlochSuperoperators, BALL_TOL};
pub use standard::{
    value_decrease_monitor, StandardSmpcOptions, StandardSmpcPolicy, StandardSmpcSolver, StandardSolution,
    ValueDecreaseReport,
};
pub use vector::{ball_radius, bloch_to_operator, bloch_to_rho, rho_to_bloch, CoherentVector};
