//! Pauli-string operator algebra and the dense oracle path.

mod dense;
mod pauli;
#[cfg(test)]
mod properties;

pub use dense::{
    apply, basis_state, diagonalize, inner, norm, to_matrix, DenseOperator, SpectralData,
    StateOperator, StateVector, MAX_DENSE_SITES,
};
pub(crate) use dense::hermitian_eigen;
pub use pauli::{
    commutator, commutator_with_tol, hs_inner, nested_tower, nested_tower_with_tol, prune, NestedTower,
    Pauli, PauliString, PauliSum, Pruned, DEFAULT_PRUNE_TOL, MAX_SITES,
};
