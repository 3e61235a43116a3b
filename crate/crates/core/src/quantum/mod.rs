//! Density matrices, Hermitian operators, operator builders, fidelity
//! measures and invariant-subspace analysis.

mod builders;
mod measures;
mod spectral;
mod state;

pub use builders::{
    angular_momentum_ops, chain_edges, ising_hamiltonian, pauli, pauli_chain_product, z_value,
    PauliAxis, SpinOperators,
};
pub(crate) use measures::overlap;
pub use measures::{bures_sq_to_pure, fidelity, validate_projector};
pub(crate) use spectral::lyapunov_from_populations;
pub use spectral::{
    invariant_subspace_gap, subspace_lyapunov, SpectralDecomposition, SubspaceGap,
    DEGENERACY_TOL,
};
pub use state::{DensityMatrix, HermitianOperator};
pub(crate) use state::same_dim;
