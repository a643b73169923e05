//! GNS construction and modular theory for `(M_n, φ)` with `φ(x) = Tr(d x)`.
//!
//! The GNS vector `Λ(x) = x d^{1/2}` is stored as the row-major entries of
//! that matrix, so the GNS inner product `(Λ(x)|Λ(y)) = Tr(d^{1/2} y^† x d^{1/2})`
//! is the standard inner product of coordinate vectors. Operators on the GNS
//! space are built column by column on the coordinate basis.
//!
//! Conjugate-linear operators are stored as a matrix `A` acting as
//! `v ↦ A conj(v)`. Composition rules:
//! - antilinear `A` after antilinear `B`: linear with matrix `A conj(B)`;
//! - antilinear `A` after linear `L`: antilinear with matrix `A conj(L)`;
//! - linear `L` after antilinear `A`: antilinear with matrix `L A`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    eigh, herm_calculus, kron, operator_norm, trace_norm, ComplexMatrix, HermitianMatrix, C64,
    DEFAULT_RANK_TOL,
};
use crate::rng;

/// Pass threshold for every residual in the modular suite.
pub const MODULAR_TOL: f64 = 1e-9;
/// `modular_data` refuses to return when the polar identity is off by more.
pub const POLAR_FAIL_TOL: f64 = 1e-8;

/// Row-major vectorization.
fn vec_of(m: &ComplexMatrix) -> Vec<C64> {
    m.as_slice().to_vec()
}

/// Builds the `n^2 x n^2` matrix of a linear map on `M_n` (row-major coordinates).
fn operator_from_fn(n: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> ComplexMatrix {
    let mut op = ComplexMatrix::zeros(n * n, n * n);
    for a in 0..n {
        for b in 0..n {
            let img = f(&ComplexMatrix::unit(n, a, b));
            op.set_column(a * n + b, &vec_of(&img));
        }
    }
    op
}

/// A conjugate-linear operator `v ↦ matrix · conj(v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AntiLinear {
    pub matrix: ComplexMatrix,
}

impl AntiLinear {
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let cv: Vec<C64> = v.iter().map(|z| z.conj()).collect();
        self.matrix.matvec(&cv).expect("dims")
    }

    /// `self ∘ other` for antilinear `other`: a linear operator.
    pub fn then_after_anti(&self, other: &AntiLinear) -> ComplexMatrix {
        &self.matrix * &other.matrix.conj()
    }

    /// `self ∘ L` for linear `L`.
    pub fn after_linear(&self, l: &ComplexMatrix) -> AntiLinear {
        AntiLinear {
            matrix: &self.matrix * &l.conj(),
        }
    }
}

/// GNS space of a faithful state on `M_n`.
#[derive(Debug, Clone)]
pub struct GnsSpace {
    n: usize,
    d: HermitianMatrix,
    d_sqrt: HermitianMatrix,
    d_inv_sqrt: HermitianMatrix,
    /// Matrix of `vec(x) ↦ vec(Λ(x)) = vec(x d^{1/2})`.
    lambda_map: ComplexMatrix,
    /// `G_{αβ} = (Λ(E_β)|Λ(E_α))`, the GNS form on the matrix-unit basis.
    gram: HermitianMatrix,
}

impl GnsSpace {
    pub fn new(d: &HermitianMatrix, rank_tol: f64) -> Result<Self> {
        crate::prep::check_state(d)?;
        let hc = herm_calculus(d, rank_tol)?;
        let lmax = hc.eig.max();
        let threshold = rank_tol * lmax;
        if hc.eig.min() <= threshold {
            return Err(Error::NotFaithful {
                min_eigenvalue: hc.eig.min(),
                threshold,
            });
        }
        let n = d.dim();
        let d_sqrt = hc.sqrt.clone();
        let lambda_map = operator_from_fn(n, |x| x * d_sqrt.as_matrix());
        let gram = HermitianMatrix::new(&lambda_map.adjoint() * &lambda_map)?;
        Ok(Self {
            n,
            d: d.clone(),
            d_sqrt,
            d_inv_sqrt: hc.pinv_sqrt,
            lambda_map,
            gram,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn density(&self) -> &HermitianMatrix {
        &self.d
    }

    pub fn gram(&self) -> &HermitianMatrix {
        &self.gram
    }

    pub fn lambda_map(&self) -> &ComplexMatrix {
        &self.lambda_map
    }

    /// Coordinates of `Λ(x)`.
    pub fn lambda(&self, x: &ComplexMatrix) -> Vec<C64> {
        vec_of(&(x * self.d_sqrt.as_matrix()))
    }

    /// `(Λ(x)|Λ(y)) = φ(y^† x)`.
    pub fn inner(&self, x: &ComplexMatrix, y: &ComplexMatrix) -> C64 {
        crate::linalg::vdot(&self.lambda(y), &self.lambda(x))
    }

    /// Left multiplication `Λ(y) ↦ Λ(xy)` as an operator on coordinates.
    pub fn left_mult(&self, x: &ComplexMatrix) -> ComplexMatrix {
        kron(x, &ComplexMatrix::identity(self.n))
    }
}

/// `S`, `J`, `Δ` on the GNS space.
#[derive(Debug, Clone)]
pub struct ModularData {
    pub s: AntiLinear,
    pub j: AntiLinear,
    pub delta: HermitianMatrix,
    pub delta_sqrt: HermitianMatrix,
    pub polar_residual: f64,
}

/// Builds `S Λ(x) = Λ(x^†)`, `J Λ(x) = Λ(d^{1/2} x^† d^{-1/2})` and
/// `Δ Λ(x) = Λ(d x d^{-1})`, then checks `S = J Δ^{1/2}`.
pub fn modular_data(g: &GnsSpace) -> Result<ModularData> {
    let n = g.n;
    let (ds, dis) = (g.d_sqrt.as_matrix(), g.d_inv_sqrt.as_matrix());
    let d = g.d.as_matrix();
    let d_inv = dis * dis;

    // On coordinates w = vec(W), W = Λ(x) = x d^{1/2}: x = W d^{-1/2}.
    // The antilinear part is absorbed by the conj in `AntiLinear::apply`, so the
    // stored matrix acts on conj(W) with W^† = conj(W)^T.
    let s = AntiLinear {
        matrix: operator_from_fn(n, |cw| {
            // x^† d^{1/2} = d^{-1/2} W^† d^{1/2}
            &(dis * &cw.transpose()) * ds
        }),
    };
    let j = AntiLinear {
        matrix: operator_from_fn(n, |cw| {
            // d^{1/2} x^† d^{-1/2} d^{1/2} = d^{1/2} d^{-1/2} W^† = W^†
            let x_dag = dis * &cw.transpose();
            &(&(ds * &x_dag) * dis) * ds
        }),
    };
    let delta = HermitianMatrix::new(operator_from_fn(n, |w| {
        // d x d^{-1} d^{1/2} with x = W d^{-1/2}
        let x = w * dis;
        &(&(d * &x) * &d_inv) * ds
    }))?;
    let delta_sqrt = herm_calculus(&delta, DEFAULT_RANK_TOL)?.sqrt;
    let polar = j.after_linear(delta_sqrt.as_matrix());
    let polar_residual = s.matrix.distance(&polar.matrix);
    if polar_residual > POLAR_FAIL_TOL {
        return Err(Error::Numerical {
            what: "polar identity S = J Δ^{1/2}".into(),
            residual: polar_residual,
        });
    }
    Ok(ModularData {
        s,
        j,
        delta,
        delta_sqrt,
        polar_residual,
    })
}

/// `φ_x`, represented by the matrix `d^{1/2} x d^{1/2}`.
pub fn embed(d: &HermitianMatrix, x: &HermitianMatrix) -> Result<HermitianMatrix> {
    if d.dim() != x.dim() {
        return Err(Error::dim("state and element dimensions differ"));
    }
    let sq = herm_calculus(d, DEFAULT_RANK_TOL)?.sqrt;
    x.congruence(sq.as_matrix())
}

/// Choi matrix of `v(y) = d^{1/2} y d^{1/2}`.
pub fn choi_of_v(d: &HermitianMatrix) -> Result<HermitianMatrix> {
    let n = d.dim();
    let sq = herm_calculus(d, DEFAULT_RANK_TOL)?.sqrt;
    let c = crate::linalg::congruence_leg_b(
        crate::linalg::max_entangled(n).as_matrix(),
        n,
        sq.as_matrix(),
    )?;
    HermitianMatrix::new(c)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub residual: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(residual: f64, tol: f64) -> Self {
        Self {
            residual,
            pass: residual <= tol,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TomitaReport {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    /// `||S - J Δ^{1/2}||_F`
    pub polar: Check,
    /// `||J^2 - 1||_F`
    pub involution: Check,
    /// `||J Λ(1) - Λ(1)||`
    pub vacuum: Check,
    /// max over samples of `||[J L_y J, L_x]||_F` with unit-norm `x`, `y`
    pub commutant: Check,
    /// multiset distance between `spec(Δ)` and `{λ_i/λ_j}`, relative to `max Δ`
    pub delta_spectrum: Check,
    pub pass: bool,
}

/// Numerical Tomita checks on a GNS space and its modular data.
pub fn verify_tomita(
    g: &GnsSpace,
    m: &ModularData,
    samples: usize,
    seed: u64,
) -> Result<TomitaReport> {
    let tol = MODULAR_TOL;
    let n = g.n;
    let nn = n * n;

    let polar =
        m.s.matrix
            .distance(&m.j.after_linear(m.delta_sqrt.as_matrix()).matrix);
    let involution =
        m.j.then_after_anti(&m.j)
            .distance(&ComplexMatrix::identity(nn));
    let one = g.lambda(&ComplexMatrix::identity(n));
    let j_one = m.j.apply(&one);
    let vacuum = j_one
        .iter()
        .zip(&one)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();

    let mut r = rng::stream(seed, rng::streams::TOMITA_COMMUTANT);
    let mut commutant = 0.0f64;
    for _ in 0..samples {
        let x = rng::ginibre(&mut r, n, n);
        let x = x.scale_real(1.0 / x.frobenius_norm());
        let y = rng::ginibre(&mut r, n, n);
        let y = y.scale_real(1.0 / y.frobenius_norm());
        let lx = g.left_mult(&x);
        // J L_y J is linear: matrix A_J conj(L_y) conj(A_J).
        let jyj = m.j.after_linear(&g.left_mult(&y)).then_after_anti(&m.j);
        let comm = &(&jyj * &lx) - &(&lx * &jyj);
        commutant = commutant.max(comm.frobenius_norm());
    }

    let delta_spectrum = delta_spectrum_residual(g, m)?;

    Ok(TomitaReport {
        n,
        samples,
        seed,
        tol,
        polar: Check::new(polar, tol),
        involution: Check::new(involution, tol),
        vacuum: Check::new(vacuum, tol),
        commutant: Check::new(commutant, tol),
        delta_spectrum: Check::new(delta_spectrum, tol),
        pass: false,
    }
    .with_tol(tol))
}

impl TomitaReport {
    /// Re-judges every residual against `tol`.
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        let checks = [
            &mut self.polar,
            &mut self.involution,
            &mut self.vacuum,
            &mut self.commutant,
            &mut self.delta_spectrum,
        ];
        let mut pass = true;
        for c in checks {
            *c = Check::new(c.residual, tol);
            pass &= c.pass;
        }
        self.pass = pass;
        self
    }
}

/// Max deviation between the sorted spectrum of `Δ` and the sorted ratios
/// `λ_i / λ_j` of the density's eigenvalues, relative to the largest ratio.
pub fn delta_spectrum_residual(g: &GnsSpace, m: &ModularData) -> Result<f64> {
    let lam = eigh(&g.d)?.eigenvalues;
    let mut ratios: Vec<f64> = lam
        .iter()
        .flat_map(|a| lam.iter().map(move |b| a / b))
        .collect();
    ratios.sort_by(f64::total_cmp);
    let spec = eigh(&m.delta)?.eigenvalues;
    let scale = ratios.last().copied().unwrap_or(1.0);
    Ok(spec
        .iter()
        .zip(&ratios)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale)
}

/// Max over sampled Hermitian pairs of `|Tr(φ_x y) - Tr(x φ_y)|`.
pub fn duality_residual(d: &HermitianMatrix, samples: usize, seed: u64) -> Result<f64> {
    let mut r = rng::stream(seed, rng::streams::MODULAR_SUITE);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = rng::hermitian(&mut r, d.dim());
        let y = rng::hermitian(&mut r, d.dim());
        let lhs = embed(d, &x)?.pairing(&y);
        let rhs = x.pairing(&embed(d, &y)?);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Max over sampled Hermitian `x` of `||φ_x||_1 - ||x||_∞` (contractive iff ≤ 0).
pub fn contractivity_excess(d: &HermitianMatrix, samples: usize, seed: u64) -> Result<f64> {
    let mut r = rng::stream(seed, rng::streams::CONTRACTIVITY);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let x = rng::hermitian(&mut r, d.dim());
        let excess = trace_norm(&embed(d, &x)?)? - operator_norm(&x)?;
        worst = worst.max(excess);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{min_eigenvalue, ONE};

    #[test]
    fn tracial_gram() {
        let d = HermitianMatrix::maximally_mixed(3);
        let g = GnsSpace::new(&d, DEFAULT_RANK_TOL).unwrap();
        let expect = HermitianMatrix::identity(9).scale(1.0 / 3.0);
        assert!(g.gram().distance(&expect) < 1e-15);
    }

    #[test]
    fn gram_entry_is_phi() {
        let d = HermitianMatrix::real_diag(&[0.75, 0.25]);
        let g = GnsSpace::new(&d, DEFAULT_RANK_TOL).unwrap();
        let e11 = ComplexMatrix::unit(2, 0, 0);
        assert!((g.inner(&e11, &e11) - C64::new(0.75, 0.0)).norm() < 1e-15);
        assert!((g.gram()[(0, 0)].re - 0.75).abs() < 1e-15);
    }

    #[test]
    fn non_faithful_rejected() {
        let d = HermitianMatrix::real_diag(&[1.0, 0.0]);
        assert!(matches!(
            GnsSpace::new(&d, DEFAULT_RANK_TOL),
            Err(Error::NotFaithful { .. })
        ));
    }

    #[test]
    fn tracial_modular_data_collapses() {
        let d = HermitianMatrix::maximally_mixed(2);
        let g = GnsSpace::new(&d, DEFAULT_RANK_TOL).unwrap();
        let m = modular_data(&g).unwrap();
        assert!(m.delta.distance(&HermitianMatrix::identity(4)) < 1e-14);
        let x =
            ComplexMatrix::from_vec(2, 2, vec![ONE, C64::new(0.0, 2.0), C64::new(3.0, 0.0), ONE])
                .unwrap();
        let jx = m.j.apply(&g.lambda(&x));
        let expect = g.lambda(&x.adjoint());
        for (a, b) in jx.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-14);
        }
        let rep = verify_tomita(&g, &m, 20, 1).unwrap();
        assert!(rep.pass);
        for c in [&rep.polar, &rep.involution, &rep.vacuum, &rep.commutant] {
            assert!(c.residual <= 1e-12, "{c:?}");
        }
    }

    #[test]
    fn delta_on_matrix_units() {
        let (l1, l2) = (0.8, 0.2);
        let d = HermitianMatrix::real_diag(&[l1, l2]);
        let g = GnsSpace::new(&d, DEFAULT_RANK_TOL).unwrap();
        let m = modular_data(&g).unwrap();
        let lam = [l1, l2];
        for i in 0..2 {
            for j in 0..2 {
                let v = g.lambda(&ComplexMatrix::unit(2, i, j));
                let dv = m.delta.matvec(&v).unwrap();
                let ratio = lam[i] / lam[j];
                for (a, b) in dv.iter().zip(&v) {
                    assert!((a - b * ratio).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn embed_of_identity_is_density() {
        let d = HermitianMatrix::real_diag(&[0.6, 0.3, 0.1]);
        let e = embed(&d, &HermitianMatrix::identity(3)).unwrap();
        assert!(e.distance(&d) < 1e-15);
        assert!((trace_norm(&e).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn order_detection() {
        let d = HermitianMatrix::real_diag(&[0.5, 0.3, 0.2]);
        let x = HermitianMatrix::real_diag(&[1.0, -0.01, 2.0]);
        assert!(min_eigenvalue(&embed(&d, &x).unwrap()).unwrap() < 0.0);
    }

    #[test]
    fn choi_of_v_examples() {
        let c = choi_of_v(&HermitianMatrix::maximally_mixed(2)).unwrap();
        assert!(c.distance(&crate::linalg::max_entangled(2).scale(0.5)) < 1e-15);
        let c = choi_of_v(&HermitianMatrix::real_diag(&[1.0, 0.0])).unwrap();
        let mut expect = HermitianMatrix::zeros(4);
        expect = expect
            .add(&HermitianMatrix::real_diag(&[1.0, 0.0, 0.0, 0.0]))
            .unwrap();
        assert!(c.distance(&expect) < 1e-15);
    }
}
