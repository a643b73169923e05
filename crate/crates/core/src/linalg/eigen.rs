//! Cyclic Jacobi eigensolver for Hermitian matrices and the spectral
//! functions built on it (square roots, support projectors, PSD projection).

use super::hermitian::HermitianMatrix;
use super::matrix::{ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Sweeps stop once the off-diagonal Frobenius mass falls below this
/// fraction of `||H||_F`.
pub const JACOBI_REL_TOL: f64 = 1e-14;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Default rank cut, relative to the largest eigenvalue magnitude.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// `H = U diag(λ) U^†` with `λ` ascending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns.
    pub eigenvectors: ComplexMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    /// Largest eigenvalue magnitude.
    pub fn spectral_radius(&self) -> f64 {
        self.min().abs().max(self.max().abs())
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.eigenvectors.column(k)
    }

    /// `U diag(f(λ)) U^†`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.dim();
        let u = &self.eigenvectors;
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &w) in fl.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let a = u[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += a * u[(j, k)].conj();
                }
            }
        }
        HermitianMatrix::new(out).expect("square by construction")
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.apply_fn(|l| l)
    }
}

/// Off-diagonal Frobenius norm.
fn off_norm(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
pub fn eigh(h: &HermitianMatrix) -> Result<EigenDecomposition> {
    let n = h.dim();
    let mut a = h.as_matrix().clone();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm();
    let target = JACOBI_REL_TOL * scale;

    let mut sweeps = 0;
    let mut off = off_norm(&a);
    while off > target {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::SolverFailure {
                sweeps,
                residual: off / scale,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        off = off_norm(&a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// One rotation annihilating `a[p][q]`: `A <- G^† A G`, `V <- V G` with
/// `G_pp = G_qq = c`, `G_pq = s e`, `G_qp = -s conj(e)`, `e = a_pq/|a_pq|`.
fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let g = apq.norm();
    if g == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // Rotating a negligible element only adds rounding noise.
    if g < f64::EPSILON * 1e-2 * (app.abs() + aqq.abs()) {
        a[(p, q)] = ZERO;
        a[(q, p)] = ZERO;
        return;
    }
    let e = apq / g;
    let tau = (aqq - app) / (2.0 * g);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let se = e * s;
    let sec = se.conj();
    let n = a.rows();

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - akq * sec;
        a[(k, q)] = akp * se + akq * c;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - aqk * se;
        a[(q, k)] = apk * sec + aqk * c;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * sec;
        v[(k, q)] = vkp * se + vkq * c;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
}

/// Square root, support-restricted inverse square root and support
/// projector of a PSD matrix.
#[derive(Debug, Clone)]
pub struct HermCalculus {
    pub sqrt: HermitianMatrix,
    pub pinv_sqrt: HermitianMatrix,
    pub support: HermitianMatrix,
    pub rank: usize,
    pub eig: EigenDecomposition,
}

/// Eigenvalues above `rank_tol * λ_max` span the support.
pub fn herm_calculus(h: &HermitianMatrix, rank_tol: f64) -> Result<HermCalculus> {
    let eig = eigh(h)?;
    let scale = eig.spectral_radius();
    let cut = rank_tol * scale;
    if eig.min() < -cut {
        return Err(Error::NotPsd {
            eigenvalue: eig.min(),
            threshold: cut,
        });
    }
    let rank = eig.eigenvalues.iter().filter(|&&l| l > cut).count();
    let sqrt = eig.apply_fn(|l| l.max(0.0).sqrt());
    let pinv_sqrt = eig.apply_fn(|l| if l > cut { 1.0 / l.sqrt() } else { 0.0 });
    let support = eig.apply_fn(|l| if l > cut { 1.0 } else { 0.0 });
    Ok(HermCalculus {
        sqrt,
        pinv_sqrt,
        support,
        rank,
        eig,
    })
}

/// Frobenius-nearest PSD matrix: clip the spectrum at zero.
pub fn psd_project(h: &HermitianMatrix) -> Result<HermitianMatrix> {
    let eig = eigh(h)?;
    if eig.min() >= 0.0 {
        return Ok(h.clone());
    }
    Ok(eig.apply_fn(|l| l.max(0.0)))
}

pub fn min_eigenvalue(h: &HermitianMatrix) -> Result<f64> {
    Ok(eigh(h)?.min())
}

/// Trace norm `Σ |λ_i|`.
pub fn trace_norm(h: &HermitianMatrix) -> Result<f64> {
    Ok(eigh(h)?.eigenvalues.iter().map(|l| l.abs()).sum())
}

/// Operator norm `max |λ_i|`.
pub fn operator_norm(h: &HermitianMatrix) -> Result<f64> {
    Ok(eigh(h)?.spectral_radius())
}
