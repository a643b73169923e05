//! Bipartite index operations.
//!
//! Index fusion is `(i, k) -> i * dim_b + k` throughout: leg A is the slow
//! index, leg B the fast one.

use serde::{Deserialize, Serialize};

use super::hermitian::HermitianMatrix;
use super::matrix::{ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Leg {
    A,
    B,
}

/// Kronecker product `(A⊗B)_{(i,k),(j,l)} = A_ij B_kl`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac, br, bc) = (a.rows(), a.cols(), b.rows(), b.cols());
    let mut out = ComplexMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| x * y))
        .collect()
}

fn check_bipartite(m: &ComplexMatrix, dim_a: usize, dim_b: usize) -> Result<()> {
    if dim_a == 0 || dim_b == 0 || !m.is_square() || m.rows() != dim_a * dim_b {
        return Err(Error::dim(format!(
            "matrix of size {}x{} is not on a {dim_a}x{dim_b} bipartite space",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

/// Transpose of one tensor leg. For `Leg::B`:
/// `Γ(M)_{(i,k),(j,l)} = M_{(i,l),(j,k)}`.
pub fn partial_transpose_raw(
    m: &ComplexMatrix,
    dim_a: usize,
    dim_b: usize,
    leg: Leg,
) -> Result<ComplexMatrix> {
    check_bipartite(m, dim_a, dim_b)?;
    let n = dim_a * dim_b;
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..dim_a {
        for k in 0..dim_b {
            for j in 0..dim_a {
                for l in 0..dim_b {
                    let src = match leg {
                        Leg::B => m[(i * dim_b + l, j * dim_b + k)],
                        Leg::A => m[(j * dim_b + k, i * dim_b + l)],
                    };
                    out[(i * dim_b + k, j * dim_b + l)] = src;
                }
            }
        }
    }
    Ok(out)
}

pub fn partial_transpose(
    m: &HermitianMatrix,
    dim_a: usize,
    dim_b: usize,
    leg: Leg,
) -> Result<HermitianMatrix> {
    // A permutation of entries of a Hermitian matrix that maps (r,c) and
    // (c,r) to a transposed pair; no averaging needed, but `new` is exact here.
    HermitianMatrix::new(partial_transpose_raw(m, dim_a, dim_b, leg)?)
}

/// Trace over one leg. `Tr_A(M)_{kl} = Σ_i M_{(i,k),(i,l)}`.
pub fn partial_trace_raw(
    m: &ComplexMatrix,
    dim_a: usize,
    dim_b: usize,
    leg: Leg,
) -> Result<ComplexMatrix> {
    check_bipartite(m, dim_a, dim_b)?;
    Ok(match leg {
        Leg::A => ComplexMatrix::from_fn(dim_b, dim_b, |k, l| {
            (0..dim_a).map(|i| m[(i * dim_b + k, i * dim_b + l)]).sum()
        }),
        Leg::B => ComplexMatrix::from_fn(dim_a, dim_a, |i, j| {
            (0..dim_b).map(|k| m[(i * dim_b + k, j * dim_b + k)]).sum()
        }),
    })
}

pub fn partial_trace(
    m: &HermitianMatrix,
    dim_a: usize,
    dim_b: usize,
    leg: Leg,
) -> Result<HermitianMatrix> {
    HermitianMatrix::new(partial_trace_raw(m, dim_a, dim_b, leg)?)
}

/// Unnormalized maximally entangled projector `Σ_ij E_ij ⊗ E_ij` on `n⊗n`.
pub fn max_entangled(n: usize) -> HermitianMatrix {
    let mut m = ComplexMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            m[(i * n + i, j * n + j)] = C64::new(1.0, 0.0);
        }
    }
    HermitianMatrix::new(m).expect("square")
}

/// `(1 ⊗ B) M (1 ⊗ B)^†` on a bipartite space with `B: dim_b_in -> dim_b_out`.
pub fn congruence_leg_b(
    m: &ComplexMatrix,
    dim_a: usize,
    b: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    check_bipartite(m, dim_a, b.cols())?;
    let op = kron(&ComplexMatrix::identity(dim_a), b);
    op.matmul(m)?.matmul(&op.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_examples() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
        let a = ComplexMatrix::real_diag(&[1.0, 2.0]);
        let b = ComplexMatrix::real_diag(&[1.0, 3.0]);
        assert_eq!(
            kron(&a, &b),
            ComplexMatrix::real_diag(&[1.0, 3.0, 2.0, 6.0])
        );
    }

    #[test]
    fn partial_transpose_of_bell_projector() {
        let phi = max_entangled(2).scale(0.5);
        let g = partial_transpose(&phi, 2, 2, Leg::B).unwrap();
        // Γ(Φ) = SWAP/2
        let mut swap = ComplexMatrix::zeros(4, 4);
        for i in 0..2 {
            for k in 0..2 {
                swap[(i * 2 + k, k * 2 + i)] = C64::new(0.5, 0.0);
            }
        }
        assert_eq!(g.as_matrix(), &swap);
    }

    #[test]
    fn partial_trace_of_bell_projector() {
        let phi = max_entangled(2).scale(0.5);
        for leg in [Leg::A, Leg::B] {
            let r = partial_trace(&phi, 2, 2, leg).unwrap();
            assert!(r.distance(&HermitianMatrix::maximally_mixed(2)) < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = HermitianMatrix::identity(5);
        assert!(partial_trace(&m, 2, 2, Leg::A).is_err());
        assert!(partial_transpose(&m, 2, 3, Leg::B).is_err());
    }
}
