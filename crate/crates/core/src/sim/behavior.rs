use std::f64::consts::FRAC_PI_4;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize};

use super::model::SimulationModel;
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, ComplexMatrix, HermitianMatrix, C64};
use crate::prep::ValidPreparation;

/// Effect-level tolerance for POVM validation.
pub const POVM_TOL: f64 = 1e-10;
/// Behaviors may carry rounding noise this far below zero.
pub const PROB_NEG_TOL: f64 = 1e-12;
pub const PROB_SUM_TOL: f64 = 1e-10;

/// Anything that assigns a value to an effect pair: a preparation or its model.
pub trait EffectPairing {
    fn dims(&self) -> (usize, usize);
    fn pair_value(&self, q: &HermitianMatrix, r: &HermitianMatrix) -> Result<f64>;
}

impl EffectPairing for ValidPreparation {
    fn dims(&self) -> (usize, usize) {
        (self.dim_a(), self.dim_b())
    }

    fn pair_value(&self, q: &HermitianMatrix, r: &HermitianMatrix) -> Result<f64> {
        self.eval(q, r)
    }
}

impl EffectPairing for SimulationModel {
    fn dims(&self) -> (usize, usize) {
        (self.dim_a, self.dim_b)
    }

    fn pair_value(&self, q: &HermitianMatrix, r: &HermitianMatrix) -> Result<f64> {
        self.simulate_value(q, r)
    }
}

/// A measurement system: PSD effects summing to the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Povm {
    pub effects: Vec<HermitianMatrix>,
}

impl Povm {
    pub fn new(effects: Vec<HermitianMatrix>) -> Self {
        Self { effects }
    }

    pub fn dim(&self) -> usize {
        self.effects.first().map_or(0, |e| e.dim())
    }

    pub fn outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn trivial(n: usize) -> Self {
        Self::new(vec![HermitianMatrix::identity(n)])
    }

    /// Computational-basis measurement on `C^n`.
    pub fn computational(n: usize) -> Self {
        Self::new(
            (0..n)
                .map(|k| {
                    let mut d = vec![0.0; n];
                    d[k] = 1.0;
                    HermitianMatrix::real_diag(&d)
                })
                .collect(),
        )
    }

    /// Projective qubit measurement of `n·σ`; outcome 0 is the `+1` eigenspace.
    pub fn qubit_axis(n: [f64; 3]) -> Self {
        let [x, y, z] = n;
        let obs = ComplexMatrix::from_vec(
            2,
            2,
            vec![
                C64::new(z, 0.0),
                C64::new(x, -y),
                C64::new(x, y),
                C64::new(-z, 0.0),
            ],
        )
        .expect("2x2");
        let one = ComplexMatrix::identity(2);
        let plus = HermitianMatrix::new((&one + &obs).scale_real(0.5)).expect("square");
        let minus = HermitianMatrix::new((&one - &obs).scale_real(0.5)).expect("square");
        Self::new(vec![plus, minus])
    }

    /// `cos θ σ_z + sin θ σ_x`.
    pub fn qubit_angle(theta: f64) -> Self {
        Self::qubit_axis([theta.sin(), 0.0, theta.cos()])
    }

    /// Checks positivity and completeness; `name` labels the error.
    pub fn validate(&self, name: &str) -> Result<()> {
        let invalid = |reason: String| Error::InvalidPovm {
            povm: name.to_string(),
            reason,
        };
        let n = self.dim();
        if self.effects.is_empty() || n == 0 {
            return Err(invalid("no effects".into()));
        }
        let mut sum = HermitianMatrix::zeros(n);
        for (k, e) in self.effects.iter().enumerate() {
            if e.dim() != n {
                return Err(invalid(format!(
                    "effect {k} has dimension {}, expected {n}",
                    e.dim()
                )));
            }
            let min = min_eigenvalue(e)?;
            if min < -POVM_TOL {
                return Err(invalid(format!(
                    "effect {k} has negative eigenvalue {min:e}"
                )));
            }
            sum = sum.add(e)?;
        }
        let defect = sum.distance(&HermitianMatrix::identity(n));
        if defect > POVM_TOL {
            return Err(invalid(format!(
                "effects sum to identity only within {defect:e}"
            )));
        }
        Ok(())
    }
}

/// Random projective qubit measurement along a uniformly random axis.
pub fn random_qubit_povm<R: Rng + ?Sized>(rng: &mut R) -> Povm {
    let v = crate::rng::unit_vector(rng, 2);
    // Bloch vector of |v>
    let (a, b) = (v[0], v[1]);
    let x = 2.0 * (a.conj() * b).re;
    let y = 2.0 * (a.conj() * b).im;
    let z = a.norm_sqr() - b.norm_sqr();
    Povm::qubit_axis([x, y, z])
}

/// Alice `σ_z`, `σ_x`; Bob `(σ_z ± σ_x)/√2`.
pub fn chsh_optimal_settings() -> (Vec<Povm>, Vec<Povm>) {
    (
        vec![Povm::qubit_angle(0.0), Povm::qubit_angle(2.0 * FRAC_PI_4)],
        vec![Povm::qubit_angle(FRAC_PI_4), Povm::qubit_angle(-FRAC_PI_4)],
    )
}

/// Table `p(a,b|x,y)`, stored flat with index `((x·n_y + y)·n_a + a)·n_b + b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Behavior {
    pub n_x: usize,
    pub n_y: usize,
    pub n_a: usize,
    pub n_b: usize,
    pub p: Vec<f64>,
}

impl Behavior {
    pub fn new(n_x: usize, n_y: usize, n_a: usize, n_b: usize, p: Vec<f64>) -> Result<Self> {
        if [n_x, n_y, n_a, n_b].contains(&0) {
            return Err(Error::dim("behavior shape entries must be positive"));
        }
        if p.len() != n_x * n_y * n_a * n_b {
            return Err(Error::dim(format!(
                "behavior table has {} entries, expected {}",
                p.len(),
                n_x * n_y * n_a * n_b
            )));
        }
        let b = Self {
            n_x,
            n_y,
            n_a,
            n_b,
            p,
        };
        for x in 0..n_x {
            for y in 0..n_y {
                let mut total = 0.0;
                for a in 0..n_a {
                    for bb in 0..n_b {
                        let v = b.get(a, bb, x, y);
                        if v.is_nan() || v < -PROB_NEG_TOL {
                            return Err(Error::contract(format!(
                                "p({a},{bb}|{x},{y}) = {v} is negative"
                            )));
                        }
                        total += v;
                    }
                }
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::contract(format!(
                        "probabilities for inputs ({x},{y}) sum to {total}"
                    )));
                }
            }
        }
        Ok(b)
    }

    /// Builds a table from `f(a, b, x, y)`.
    pub fn from_fn(
        n_x: usize,
        n_y: usize,
        n_a: usize,
        n_b: usize,
        f: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut p = Vec::with_capacity(n_x * n_y * n_a * n_b);
        for x in 0..n_x {
            for y in 0..n_y {
                for a in 0..n_a {
                    for b in 0..n_b {
                        p.push(f(a, b, x, y));
                    }
                }
            }
        }
        Self::new(n_x, n_y, n_a, n_b, p)
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[((x * self.n_y + y) * self.n_a + a) * self.n_b + b]
    }

    pub fn is_2222(&self) -> bool {
        (self.n_x, self.n_y, self.n_a, self.n_b) == (2, 2, 2, 2)
    }

    /// Flat `x,y,a,b,p` table with a header row.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(["x", "y", "a", "b", "p"]).map_err(io)?;
        for x in 0..self.n_x {
            for y in 0..self.n_y {
                for a in 0..self.n_a {
                    for b in 0..self.n_b {
                        out.serialize((x, y, a, b, self.get(a, b, x, y)))
                            .map_err(io)?;
                    }
                }
            }
        }
        out.flush().map_err(|e| Error::Io(e.to_string()))
    }

    pub fn pr_box() -> Self {
        Self::from_fn(
            2,
            2,
            2,
            2,
            |a, b, x, y| if (a ^ b) == (x & y) { 0.5 } else { 0.0 },
        )
        .expect("valid table")
    }

    pub fn uniform(n_x: usize, n_y: usize, n_a: usize, n_b: usize) -> Self {
        let v = 1.0 / (n_a * n_b) as f64;
        Self::from_fn(n_x, n_y, n_a, n_b, |_, _, _, _| v).expect("valid table")
    }

    /// Local deterministic box `a = f[x]`, `b = g[y]` in the 2222 scenario.
    pub fn deterministic(f: [usize; 2], g: [usize; 2]) -> Self {
        Self::from_fn(
            2,
            2,
            2,
            2,
            |a, b, x, y| {
                if a == f[x] && b == g[y] {
                    1.0
                } else {
                    0.0
                }
            },
        )
        .expect("valid table")
    }

    /// Convex combination of same-shape behaviors.
    pub fn mixture(parts: &[(f64, &Behavior)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("empty mixture"))?
            .1;
        let mut p = vec![0.0; first.p.len()];
        for (w, b) in parts {
            if b.p.len() != p.len() {
                return Err(Error::dim("mixture of behaviors with different shapes"));
            }
            for (acc, v) in p.iter_mut().zip(&b.p) {
                *acc += w * v;
            }
        }
        Self::new(first.n_x, first.n_y, first.n_a, first.n_b, p)
    }
}

impl<'de> Deserialize<'de> for Behavior {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            n_x: usize,
            n_y: usize,
            n_a: usize,
            n_b: usize,
            p: Vec<f64>,
        }
        let w = Wire::deserialize(d)?;
        Behavior::new(w.n_x, w.n_y, w.n_a, w.n_b, w.p).map_err(serde::de::Error::custom)
    }
}

/// `p(a,b|x,y)` from a preparation or model and local measurement choices.
pub fn behavior_of<T: EffectPairing + ?Sized>(
    source: &T,
    a_meas: &[Povm],
    b_meas: &[Povm],
) -> Result<Behavior> {
    let (dim_a, dim_b) = source.dims();
    if a_meas.is_empty() || b_meas.is_empty() {
        return Err(Error::contract(
            "at least one measurement per side is required",
        ));
    }
    for (side, meas, dim) in [("alice", a_meas, dim_a), ("bob", b_meas, dim_b)] {
        for (k, m) in meas.iter().enumerate() {
            let name = format!("{side}[{k}]");
            m.validate(&name)?;
            if m.dim() != dim {
                return Err(Error::InvalidPovm {
                    povm: name,
                    reason: format!("acts on dimension {}, expected {dim}", m.dim()),
                });
            }
            if m.outcomes() != meas[0].outcomes() {
                return Err(Error::InvalidPovm {
                    povm: name,
                    reason: "all measurements on one side need the same outcome count".into(),
                });
            }
        }
    }
    let (n_a, n_b) = (a_meas[0].outcomes(), b_meas[0].outcomes());
    let mut p = Vec::with_capacity(a_meas.len() * b_meas.len() * n_a * n_b);
    for qa in a_meas {
        for rb in b_meas {
            for q in &qa.effects {
                for r in &rb.effects {
                    p.push(source.pair_value(q, r)?);
                }
            }
        }
    }
    Behavior::new(a_meas.len(), b_meas.len(), n_a, n_b, p)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct NsReport {
    /// Max over `(b, y)` of the spread across `x` of `Σ_a p(a,b|x,y)`.
    pub bob_marginal_spread: f64,
    /// Max over `(a, x)` of the spread across `y` of `Σ_b p(a,b|x,y)`.
    pub alice_marginal_spread: f64,
    pub tol: f64,
    pub pass: bool,
}

pub fn ns_check(b: &Behavior, tol: f64) -> NsReport {
    let spread = |vals: &mut dyn Iterator<Item = f64>| {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in vals {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi - lo
    };
    let mut bob = 0.0f64;
    for y in 0..b.n_y {
        for bb in 0..b.n_b {
            let s = spread(&mut (0..b.n_x).map(|x| (0..b.n_a).map(|a| b.get(a, bb, x, y)).sum()));
            bob = bob.max(s);
        }
    }
    let mut alice = 0.0f64;
    for x in 0..b.n_x {
        for a in 0..b.n_a {
            let s = spread(&mut (0..b.n_y).map(|y| (0..b.n_b).map(|bb| b.get(a, bb, x, y)).sum()));
            alice = alice.max(s);
        }
    }
    NsReport {
        bob_marginal_spread: bob,
        alice_marginal_spread: alice,
        tol,
        pass: bob <= tol && alice <= tol,
    }
}

/// Correlator `E_xy = Σ_ab (-1)^{a+b} p(a,b|x,y)`.
pub fn correlator(b: &Behavior, x: usize, y: usize) -> f64 {
    let mut e = 0.0;
    for a in 0..2 {
        for bb in 0..2 {
            let sign = if (a + bb) % 2 == 0 { 1.0 } else { -1.0 };
            e += sign * b.get(a, bb, x, y);
        }
    }
    e
}

fn require_2222(b: &Behavior) -> Result<()> {
    if !b.is_2222() {
        return Err(Error::dim(format!(
            "CHSH needs the 2222 scenario, got ({}, {}, {}, {})",
            b.n_x, b.n_y, b.n_a, b.n_b
        )));
    }
    Ok(())
}

/// `S = Σ_{x,y} (-1)^{xy} E_xy` with outputs in `{0, 1}`.
pub fn chsh_value(b: &Behavior) -> Result<f64> {
    require_2222(b)?;
    Ok(correlator(b, 0, 0) + correlator(b, 0, 1) + correlator(b, 1, 0) - correlator(b, 1, 1))
}

/// The eight CHSH expressions `±(E00 + E01 + E10 + E11 - 2 E_xy)`.
pub fn chsh_family(b: &Behavior) -> Result<[f64; 8]> {
    require_2222(b)?;
    let e = [
        [correlator(b, 0, 0), correlator(b, 0, 1)],
        [correlator(b, 1, 0), correlator(b, 1, 1)],
    ];
    let total = e[0][0] + e[0][1] + e[1][0] + e[1][1];
    let mut out = [0.0; 8];
    for (k, (x, y)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        let s = total - 2.0 * e[x][y];
        out[2 * k] = s;
        out[2 * k + 1] = -s;
    }
    Ok(out)
}

/// Local-polytope membership for a non-signalling 2222 behavior.
pub fn is_local_2222(b: &Behavior, tol: f64) -> Result<bool> {
    require_2222(b)?;
    let ns = ns_check(b, tol);
    if !ns.pass {
        return Err(Error::contract(format!(
            "behavior is signalling (spread {:e})",
            ns.bob_marginal_spread.max(ns.alice_marginal_spread)
        )));
    }
    Ok(chsh_family(b)?.iter().all(|&s| s <= 2.0 + tol))
}
