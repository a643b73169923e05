//! Valid preparations: bilinear functionals `ω(Q, R)` on `M_{dim_a} × M_{dim_b}`
//! stored as the block matrix `C_ω = Σ_ij E_ij ⊗ M_ij`, where `M_ij` represents
//! the functional `ω(E_ij, ·)` under the pairing `f(y) = Tr(M y)`.
//!
//! With that pairing the evaluation rule is `ω(Q, R) = Tr(C_ω (Q^T ⊗ R))`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{
    herm_calculus, kron, partial_trace, ComplexMatrix, HermitianMatrix, Leg, C64, DEFAULT_RANK_TOL,
    HERMITIAN_TOL, ZERO,
};
use crate::rng;

/// Absolute tolerance for `ω(1,1) = 1`, unitality and reality checks.
pub const NORMALIZATION_TOL: f64 = 1e-10;
/// Threshold for the sampled pure-tensor positivity test.
pub const POSITIVITY_TOL: f64 = 1e-10;

/// A Hermiticity-preserving linear map `M_{dim_in} -> M_{dim_out}` given by its
/// Choi matrix `C_u = Σ_ij E_ij ⊗ u(E_ij)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveMapDescriptor {
    dim_in: usize,
    dim_out: usize,
    choi: HermitianMatrix,
    label: String,
    unital: bool,
}

impl PositiveMapDescriptor {
    pub fn from_choi(
        dim_in: usize,
        dim_out: usize,
        choi: HermitianMatrix,
        label: impl Into<String>,
    ) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 || choi.dim() != dim_in * dim_out {
            return Err(Error::dim(format!(
                "Choi matrix of size {} does not match map {dim_in} -> {dim_out}",
                choi.dim()
            )));
        }
        let mut d = Self {
            dim_in,
            dim_out,
            choi,
            label: label.into(),
            unital: false,
        };
        let one = d.apply(&HermitianMatrix::identity(dim_in))?;
        d.unital = one.distance(&HermitianMatrix::identity(dim_out)) <= NORMALIZATION_TOL;
        Ok(d)
    }

    /// Builds the Choi matrix by evaluating `f` on matrix units. `f` must be
    /// linear and Hermiticity-preserving.
    pub fn from_fn(
        dim_in: usize,
        dim_out: usize,
        label: impl Into<String>,
        f: impl Fn(&ComplexMatrix) -> ComplexMatrix,
    ) -> Result<Self> {
        let n = dim_in * dim_out;
        let mut c = ComplexMatrix::zeros(n, n);
        for i in 0..dim_in {
            for j in 0..dim_in {
                let img = f(&ComplexMatrix::unit(dim_in, i, j));
                if img.rows() != dim_out || img.cols() != dim_out {
                    return Err(Error::dim("map image has the wrong size"));
                }
                for k in 0..dim_out {
                    for l in 0..dim_out {
                        c[(i * dim_out + k, j * dim_out + l)] = img[(k, l)];
                    }
                }
            }
        }
        let choi = HermitianMatrix::strict(c, HERMITIAN_TOL)
            .map_err(|_| Error::contract("map is not Hermiticity-preserving"))?;
        Self::from_choi(dim_in, dim_out, choi, label)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn choi(&self) -> &HermitianMatrix {
        &self.choi
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_unital(&self) -> bool {
        self.unital
    }

    /// `u(x) = Σ_ij x_ij · block_ij(C_u) = Tr_in[C_u (x^T ⊗ 1)]`.
    pub fn apply_raw(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.rows() != self.dim_in || x.cols() != self.dim_in {
            return Err(Error::dim(format!(
                "map expects {0}x{0} input, got {1}x{2}",
                self.dim_in,
                x.rows(),
                x.cols()
            )));
        }
        let (m, p) = (self.dim_in, self.dim_out);
        let mut out = ComplexMatrix::zeros(p, p);
        for i in 0..m {
            for j in 0..m {
                let xij = x[(i, j)];
                if xij == ZERO {
                    continue;
                }
                for k in 0..p {
                    for l in 0..p {
                        out[(k, l)] += xij * self.choi[(i * p + k, j * p + l)];
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn apply(&self, x: &HermitianMatrix) -> Result<HermitianMatrix> {
        HermitianMatrix::new(self.apply_raw(x)?)
    }
}

#[derive(Serialize, Deserialize)]
struct MapWire {
    dim_in: usize,
    dim_out: usize,
    label: String,
    choi: ComplexMatrix,
    #[serde(default, skip_deserializing)]
    unital: bool,
}

impl Serialize for PositiveMapDescriptor {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MapWire {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            label: self.label.clone(),
            choi: self.choi.as_matrix().clone(),
            unital: self.unital,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PositiveMapDescriptor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = MapWire::deserialize(d)?;
        let choi =
            HermitianMatrix::strict(w.choi, HERMITIAN_TOL).map_err(serde::de::Error::custom)?;
        Self::from_choi(w.dim_in, w.dim_out, choi, w.label).map_err(serde::de::Error::custom)
    }
}

/// A normalized, Hermitian bilinear functional on `M_{dim_a} × M_{dim_b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidPreparation {
    dim_a: usize,
    dim_b: usize,
    blocks: HermitianMatrix,
    label: String,
}

impl ValidPreparation {
    /// `ω(x, y) = Tr(d^{1/2} u(x) d^{1/2} y)`, the composite of `u` with the
    /// completely positive map `y ↦ d^{1/2} y d^{1/2}`.
    pub fn from_positive_map(u: &PositiveMapDescriptor, d: &HermitianMatrix) -> Result<Self> {
        if !u.is_unital() {
            return Err(Error::contract(format!(
                "map '{}' is not unital",
                u.label()
            )));
        }
        if d.dim() != u.dim_out() {
            return Err(Error::dim(format!(
                "state has dimension {} but map '{}' outputs {}",
                d.dim(),
                u.label(),
                u.dim_out()
            )));
        }
        check_state(d)?;
        let hc = herm_calculus(d, DEFAULT_RANK_TOL)?;
        let c = crate::linalg::congruence_leg_b(u.choi(), u.dim_in(), &hc.sqrt)?;
        Ok(Self {
            dim_a: u.dim_in(),
            dim_b: u.dim_out(),
            blocks: HermitianMatrix::new(c)?,
            label: format!("{}|state", u.label()),
        })
    }

    /// Validates raw block data. The matrix is taken as given, before any
    /// Hermitian averaging, so non-real values on Hermitian pairs are caught.
    pub fn from_explicit(blocks: &ComplexMatrix, dim_a: usize, dim_b: usize) -> Result<Self> {
        Self::from_explicit_inner(blocks, dim_a, dim_b, false)
    }

    /// As [`from_explicit`](Self::from_explicit), but divides by `ω(1,1)` when
    /// it lies in `[0.9, 1.1]`.
    pub fn from_explicit_renormalized(
        blocks: &ComplexMatrix,
        dim_a: usize,
        dim_b: usize,
    ) -> Result<Self> {
        Self::from_explicit_inner(blocks, dim_a, dim_b, true)
    }

    fn from_explicit_inner(
        blocks: &ComplexMatrix,
        dim_a: usize,
        dim_b: usize,
        renormalize: bool,
    ) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 || !blocks.is_square() || blocks.rows() != dim_a * dim_b {
            return Err(Error::dim(format!(
                "blocks of size {}x{} do not match dims ({dim_a}, {dim_b})",
                blocks.rows(),
                blocks.cols()
            )));
        }
        check_real_on_hermitian(blocks, dim_a, dim_b)?;
        let mut h = HermitianMatrix::new(blocks.clone())?;
        let norm = h.real_trace();
        if (norm - 1.0).abs() > NORMALIZATION_TOL {
            if renormalize && (0.9..=1.1).contains(&norm) {
                h = h.scale(1.0 / norm);
            } else {
                return Err(Error::Normalization { measured: norm });
            }
        }
        Ok(Self {
            dim_a,
            dim_b,
            blocks: h,
            label: "explicit".into(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn blocks(&self) -> &HermitianMatrix {
        &self.blocks
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `ω(Q, R) = Tr(C_ω (Q^T ⊗ R))` for arbitrary complex `Q`, `R`.
    pub fn eval_complex(&self, q: &ComplexMatrix, r: &ComplexMatrix) -> Result<C64> {
        if q.rows() != self.dim_a || q.cols() != self.dim_a {
            return Err(Error::dim(format!("Q must be {0}x{0}", self.dim_a)));
        }
        if r.rows() != self.dim_b || r.cols() != self.dim_b {
            return Err(Error::dim(format!("R must be {0}x{0}", self.dim_b)));
        }
        let (m, p) = (self.dim_a, self.dim_b);
        let c = &self.blocks;
        let mut acc = ZERO;
        for i in 0..m {
            for j in 0..m {
                let qij = q[(i, j)];
                if qij == ZERO {
                    continue;
                }
                // Tr(M_ij R)
                let mut t = ZERO;
                for k in 0..p {
                    for l in 0..p {
                        t += c[(i * p + k, j * p + l)] * r[(l, k)];
                    }
                }
                acc += qij * t;
            }
        }
        Ok(acc)
    }

    /// Real value on Hermitian arguments.
    pub fn eval(&self, q: &HermitianMatrix, r: &HermitianMatrix) -> Result<f64> {
        let z = self.eval_complex(q, r)?;
        let scale = 1.0f64.max(q.frobenius_norm() * r.frobenius_norm());
        if z.im.abs() > NORMALIZATION_TOL * scale {
            return Err(Error::Numerical {
                what: "imaginary residue in preparation value".into(),
                residual: z.im.abs(),
            });
        }
        Ok(z.re)
    }

    /// `(bob_state, alice_functional)`: the matrices of `ω̂(1) = ω(1, ·)` and
    /// `ω(·, 1)` under the trace pairing.
    pub fn marginals(&self) -> Result<(HermitianMatrix, HermitianMatrix)> {
        let bob = partial_trace(&self.blocks, self.dim_a, self.dim_b, Leg::A)?;
        let alice = partial_trace(&self.blocks, self.dim_a, self.dim_b, Leg::B)?.transpose();
        for (name, m) in [("Bob", &bob), ("Alice", &alice)] {
            check_state(m).map_err(|e| {
                Error::InvalidPreparation(format!("{name} marginal is not a state: {e}"))
            })?;
        }
        Ok((bob, alice))
    }

    pub fn bob_state(&self) -> Result<HermitianMatrix> {
        Ok(self.marginals()?.0)
    }

    /// Monte-Carlo minimum of `ω(|ψ><ψ|, |χ><χ|)` over Haar-random pure pairs.
    pub fn sample_pure_tensor_positivity(&self, n: usize, seed: u64) -> PositivityReport {
        let mut rng = rng::stream(seed, rng::streams::PURE_TENSOR_SAMPLER);
        let mut min_value = f64::INFINITY;
        let mut argmin = (vec![], vec![]);
        for _ in 0..n.max(1) {
            let psi = rng::unit_vector(&mut rng, self.dim_a);
            let chi = rng::unit_vector(&mut rng, self.dim_b);
            let v = self.pure_value(&psi, &chi);
            if v < min_value {
                min_value = v;
                argmin = (psi, chi);
            }
        }
        PositivityReport {
            n_samples: n.max(1),
            seed,
            min_value,
            argmin_a: argmin.0,
            argmin_b: argmin.1,
            tol: POSITIVITY_TOL,
            passed: min_value >= -POSITIVITY_TOL,
        }
    }

    /// `ω(|ψ><ψ|, |χ><χ|) = <v|C_ω|v>` with `v = conj(ψ) ⊗ χ`.
    fn pure_value(&self, psi: &[C64], chi: &[C64]) -> f64 {
        let psi_c: Vec<C64> = psi.iter().map(|z| z.conj()).collect();
        let v = crate::linalg::kron_vec(&psi_c, chi);
        let cv = self.blocks.matvec(&v).expect("dims agree");
        crate::linalg::vdot(&v, &cv).re
    }
}

/// PSD with unit trace, both within tolerance.
pub(crate) fn check_state(d: &HermitianMatrix) -> Result<()> {
    let tr = d.real_trace();
    if (tr - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::contract(format!("state has trace {tr}, expected 1")));
    }
    let min = crate::linalg::min_eigenvalue(d)?;
    if min < -NORMALIZATION_TOL {
        return Err(Error::NotPsd {
            eigenvalue: min,
            threshold: NORMALIZATION_TOL,
        });
    }
    Ok(())
}

/// Named sparse matrix: `(label, [(row, col, value)])`.
type SparseNamed = (String, Vec<(usize, usize, C64)>);

/// Sparse Hermitian basis of `M_n`: `E_ii`, `E_ij + E_ji`, `i(E_ij - E_ji)`.
fn hermitian_basis(n: usize) -> Vec<SparseNamed> {
    let one = C64::new(1.0, 0.0);
    let i_ = C64::new(0.0, 1.0);
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        out.push((format!("E{a}{a}"), vec![(a, a, one)]));
        for b in (a + 1)..n {
            out.push((format!("E{a}{b}+E{b}{a}"), vec![(a, b, one), (b, a, one)]));
            out.push((format!("i(E{a}{b}-E{b}{a})"), vec![(a, b, i_), (b, a, -i_)]));
        }
    }
    out
}

/// Evaluates the raw functional on every pair of Hermitian basis elements and
/// rejects the data if any value has an imaginary part above tolerance.
fn check_real_on_hermitian(c: &ComplexMatrix, dim_a: usize, dim_b: usize) -> Result<()> {
    let (ba, bb) = (hermitian_basis(dim_a), hermitian_basis(dim_b));
    let mut worst = (0.0f64, String::new());
    for (qn, q) in &ba {
        for (rn, r) in &bb {
            // Σ C_{(i,k),(j,l)} Q_ij R_lk
            let mut z = ZERO;
            for &(i, j, qv) in q {
                for &(l, k, rv) in r {
                    z += c[(i * dim_b + k, j * dim_b + l)] * qv * rv;
                }
            }
            if z.im.abs() > worst.0 {
                worst = (z.im.abs(), format!("Q={qn}, R={rn}"));
            }
        }
    }
    if worst.0 > NORMALIZATION_TOL {
        return Err(Error::NonReal {
            value: worst.0,
            pair: worst.1,
        });
    }
    Ok(())
}

/// Outcome of the sampled pure-tensor positivity test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub n_samples: usize,
    pub seed: u64,
    pub min_value: f64,
    #[serde(serialize_with = "ser_vec")]
    pub argmin_a: Vec<C64>,
    #[serde(serialize_with = "ser_vec")]
    pub argmin_b: Vec<C64>,
    pub tol: f64,
    pub passed: bool,
}

pub(crate) fn ser_vec<S: Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
    pairs.serialize(s)
}

#[derive(Serialize, Deserialize)]
struct PrepWire {
    dim_a: usize,
    dim_b: usize,
    #[serde(default)]
    label: Option<String>,
    blocks: ComplexMatrix,
}

impl Serialize for ValidPreparation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PrepWire {
            dim_a: self.dim_a,
            dim_b: self.dim_b,
            label: Some(self.label.clone()),
            blocks: self.blocks.as_matrix().clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ValidPreparation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = PrepWire::deserialize(d)?;
        let p =
            Self::from_explicit(&w.blocks, w.dim_a, w.dim_b).map_err(serde::de::Error::custom)?;
        Ok(match w.label {
            Some(l) => p.with_label(l),
            None => p,
        })
    }
}

/// Block matrix of the product functional `ω(x, y) = Tr(x a) Tr(y b)`.
pub fn product_blocks(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    kron(&a.transpose(), b)
}
