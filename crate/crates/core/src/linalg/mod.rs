//! Dense complex linear algebra: matrices, a Hermitian eigensolver and the
//! bipartite operations (Kronecker product, partial transpose, partial trace).

mod eigen;
mod hermitian;
mod matrix;
mod ops;

pub use eigen::{
    eigh, herm_calculus, min_eigenvalue, operator_norm, psd_project, trace_norm,
    EigenDecomposition, HermCalculus, DEFAULT_RANK_TOL, JACOBI_MAX_SWEEPS, JACOBI_REL_TOL,
};
pub use hermitian::{HermitianMatrix, HERMITIAN_TOL};
pub use matrix::{vdot, vec_norm, ComplexMatrix, C64, ONE, ZERO};
pub use ops::{
    congruence_leg_b, kron, kron_vec, max_entangled, partial_trace, partial_trace_raw,
    partial_transpose, partial_transpose_raw, Leg,
};
