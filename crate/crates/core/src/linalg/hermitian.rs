use std::ops::Deref;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::matrix::{ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Relative tolerance for accepting raw data as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Square complex matrix kept exactly Hermitian.
///
/// Construction averages `(M + M^†) / 2` and keeps the pre-averaging defect
/// `max |M_ij - conj(M_ji)|` around for callers that need to know how far the
/// raw input was from Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    inner: ComplexMatrix,
    defect: f64,
}

impl HermitianMatrix {
    /// Symmetrizes any square matrix.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let defect = m.hermiticity_defect();
        let n = m.rows();
        let mut h = m;
        for i in 0..n {
            h[(i, i)] = C64::new(h[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let avg = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
                h[(i, j)] = avg;
                h[(j, i)] = avg.conj();
            }
        }
        Ok(Self { inner: h, defect })
    }

    /// Like [`HermitianMatrix::new`] but rejects inputs whose defect exceeds
    /// `rel_tol` times the largest entry magnitude.
    pub fn strict(m: ComplexMatrix, rel_tol: f64) -> Result<Self> {
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        let h = Self::new(m)?;
        if h.defect > rel_tol * scale {
            return Err(Error::contract(format!(
                "matrix is not Hermitian: defect {:e} exceeds {:e}",
                h.defect,
                rel_tol * scale
            )));
        }
        Ok(h)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: ComplexMatrix::identity(n),
            defect: 0.0,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: ComplexMatrix::zeros(n, n),
            defect: 0.0,
        }
    }

    pub fn real_diag(values: &[f64]) -> Self {
        Self {
            inner: ComplexMatrix::real_diag(values),
            defect: 0.0,
        }
    }

    /// Maximally mixed state `1/n`.
    pub fn maximally_mixed(n: usize) -> Self {
        Self::identity(n).scale(1.0 / n as f64)
    }

    /// Rank-one projector `|v><v|` for a unit vector `v`.
    pub fn projector(v: &[C64]) -> Self {
        Self::new(ComplexMatrix::outer(v, v)).expect("outer product is square")
    }

    pub fn dim(&self) -> usize {
        self.inner.rows()
    }

    pub fn defect(&self) -> f64 {
        self.defect
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.inner
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            inner: self.inner.scale_real(s),
            defect: 0.0,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            inner: self.inner.try_add(&other.inner)?,
            defect: 0.0,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            inner: self.inner.try_sub(&other.inner)?,
            defect: 0.0,
        })
    }

    pub fn real_trace(&self) -> f64 {
        self.inner.trace().re
    }

    pub fn transpose(&self) -> Self {
        Self {
            inner: self.inner.transpose(),
            defect: 0.0,
        }
    }

    /// Unitary congruence `A H A^†`; stays Hermitian for any `A`.
    pub fn congruence(&self, a: &ComplexMatrix) -> Result<Self> {
        let m = a.matmul(&self.inner)?.matmul(&a.adjoint())?;
        Self::new(m)
    }

    /// Real Frobenius pairing `Tr(A B)` of two Hermitian matrices.
    pub fn pairing(&self, other: &Self) -> f64 {
        self.inner.hs_inner(&other.inner).re
    }
}

impl Deref for HermitianMatrix {
    type Target = ComplexMatrix;

    fn deref(&self) -> &ComplexMatrix {
        &self.inner
    }
}

impl Serialize for HermitianMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.inner.serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = ComplexMatrix::deserialize(d)?;
        HermitianMatrix::strict(m, HERMITIAN_TOL).map_err(serde::de::Error::custom)
    }
}
