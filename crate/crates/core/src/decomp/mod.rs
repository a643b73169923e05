//! Complete positivity, co-complete positivity and decomposability.
//!
//! A map with Choi matrix `C` is decomposable when `C = P + Γ(Q)` with
//! `P, Q ⪰ 0`, where `Γ` is the partial transpose on the output leg.
//! [`decompose`] searches for such a pair by Dykstra's alternating projections;
//! when the search stalls at a positive distance it extracts a separating
//! witness `W` with `W ⪰ 0`, `Γ(W) ⪰ 0` and `<W, C> < 0`, which
//! [`verify_certificate`] checks independently of how it was found.

pub mod zoo;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh, partial_transpose, psd_project, HermitianMatrix, Leg};
use crate::prep::PositiveMapDescriptor;
use crate::rng;

pub use zoo::{zoo, MapSpec};

/// `u(x)` for a map given by its Choi matrix.
pub fn apply_map(u: &PositiveMapDescriptor, x: &HermitianMatrix) -> Result<HermitianMatrix> {
    u.apply(x)
}

/// Choi test: `λ_min(C_u) ≥ -tol`.
pub fn is_cp(u: &PositiveMapDescriptor, tol: f64) -> Result<(bool, f64)> {
    let min = eigh(u.choi())?.min();
    Ok((min >= -tol, min))
}

/// Co-CP test: `λ_min(Γ(C_u)) ≥ -tol`.
pub fn is_co_cp(u: &PositiveMapDescriptor, tol: f64) -> Result<(bool, f64)> {
    let g = partial_transpose(u.choi(), u.dim_in(), u.dim_out(), Leg::B)?;
    let min = eigh(&g)?.min();
    Ok((min >= -tol, min))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompOptions {
    pub max_iter: usize,
    pub tol_feas: f64,
    pub gap_tol: f64,
    /// Seed for the certificate retry perturbations.
    pub seed: u64,
}

impl Default for DecompOptions {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            tol_feas: 1e-8,
            gap_tol: 1e-6,
            seed: 0,
        }
    }
}

/// Tolerance used when validating extracted certificates.
pub const CERT_TOL: f64 = 1e-9;
/// Stall window and relative-change threshold for infeasibility detection.
pub const STALL_WINDOW: usize = 100;
pub const STALL_REL_CHANGE: f64 = 1e-12;
const CERT_RETRIES: usize = 20;
const POLISH_ITERS: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompStatus {
    Feasible,
    Infeasible,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompOutcome {
    pub status: DecompStatus,
    pub dim_in: usize,
    pub dim_out: usize,
    /// PSD part, present when feasible.
    pub p: Option<HermitianMatrix>,
    /// Co-PSD part (`C = P + Γ(Q)`), present when feasible.
    pub q: Option<HermitianMatrix>,
    /// Unit-Frobenius witness, present when infeasible.
    pub w: Option<HermitianMatrix>,
    /// `-<W, C>` for a verified witness, else 0.
    pub violation: f64,
    pub iterations: usize,
    /// Constraint residual `||P + Γ(Q) - C||_F` when feasible; last
    /// inter-set displacement otherwise.
    pub residual: f64,
}

#[derive(Clone)]
struct Pair {
    p: HermitianMatrix,
    q: HermitianMatrix,
}

impl Pair {
    fn add(&self, o: &Pair) -> Pair {
        Pair {
            p: self.p.add(&o.p).expect("same dims"),
            q: self.q.add(&o.q).expect("same dims"),
        }
    }

    fn sub(&self, o: &Pair) -> Pair {
        Pair {
            p: self.p.sub(&o.p).expect("same dims"),
            q: self.q.sub(&o.q).expect("same dims"),
        }
    }

    fn norm(&self) -> f64 {
        (self.p.frobenius_norm().powi(2) + self.q.frobenius_norm().powi(2)).sqrt()
    }
}

struct Problem<'a> {
    c: &'a HermitianMatrix,
    dim_in: usize,
    dim_out: usize,
}

impl Problem<'_> {
    fn gamma(&self, m: &HermitianMatrix) -> HermitianMatrix {
        partial_transpose(m, self.dim_in, self.dim_out, Leg::B).expect("dims checked")
    }

    /// `P + Γ(Q) - C`.
    fn constraint_residual(&self, x: &Pair) -> HermitianMatrix {
        x.p.add(&self.gamma(&x.q))
            .and_then(|s| s.sub(self.c))
            .expect("dims checked")
    }

    /// Orthogonal projection onto `{P + Γ(Q) = C}`: with `R` the residual,
    /// `P - R/2`, `Q - Γ(R)/2`.
    fn project_affine(&self, x: &Pair) -> Pair {
        let r = self.constraint_residual(x).scale(0.5);
        Pair {
            p: x.p.sub(&r).expect("dims"),
            q: x.q.sub(&self.gamma(&r)).expect("dims"),
        }
    }

    fn project_cones(&self, x: &Pair) -> Result<Pair> {
        Ok(Pair {
            p: psd_project(&x.p)?,
            q: psd_project(&x.q)?,
        })
    }
}

/// Decides whether `C = P + Γ(Q)` has a PSD solution.
pub fn decompose(
    c: &HermitianMatrix,
    dims: (usize, usize),
    opts: &DecompOptions,
) -> Result<DecompOutcome> {
    let (dim_in, dim_out) = dims;
    if dim_in == 0 || dim_out == 0 || c.dim() != dim_in * dim_out {
        return Err(Error::dim(format!(
            "Choi matrix of size {} does not match dims ({dim_in}, {dim_out})",
            c.dim()
        )));
    }
    let prob = Problem { c, dim_in, dim_out };
    let zero = HermitianMatrix::zeros(c.dim());
    let feasible = |x: &Pair, iterations: usize, residual: f64| DecompOutcome {
        status: DecompStatus::Feasible,
        dim_in,
        dim_out,
        p: Some(x.p.clone()),
        q: Some(x.q.clone()),
        w: None,
        violation: 0.0,
        iterations,
        residual,
    };

    // K1 iterate and its Dykstra correction.
    let mut x = Pair {
        p: psd_project(c)?,
        q: zero.clone(),
    };
    let mut corr = Pair {
        p: zero.clone(),
        q: zero,
    };
    let mut gaps: Vec<f64> = Vec::with_capacity(opts.max_iter.min(1 << 16));
    let mut last_gap = f64::INFINITY;

    for it in 0..=opts.max_iter {
        // x is PSD by construction; accept it when it already satisfies the constraint.
        let r = prob.constraint_residual(&x).frobenius_norm();
        if r <= opts.tol_feas {
            return Ok(feasible(&x, it, r));
        }
        let y = prob.project_affine(&x);
        let (lp, lq) = (eigh(&y.p)?.min(), eigh(&y.q)?.min());
        if lp >= -opts.tol_feas && lq >= -opts.tol_feas {
            let r = prob.constraint_residual(&y).frobenius_norm();
            return Ok(feasible(&y, it, r));
        }
        if it == opts.max_iter {
            break;
        }

        let z = y.add(&corr);
        let x_next = prob.project_cones(&z)?;
        corr = z.sub(&x_next);
        let disp = x_next.sub(&y);
        let gap = disp.norm();
        last_gap = gap;
        gaps.push(gap);

        let k = gaps.len();
        if k > STALL_WINDOW && gap > opts.gap_tol {
            let before = gaps[k - 1 - STALL_WINDOW];
            if ((gap - before) / gap).abs() < STALL_REL_CHANGE {
                if let Some((w, violation)) = extract_certificate(&prob, &disp.p, opts)? {
                    return Ok(DecompOutcome {
                        status: DecompStatus::Infeasible,
                        dim_in,
                        dim_out,
                        p: None,
                        q: None,
                        w: Some(w),
                        violation,
                        iterations: it + 1,
                        residual: gap,
                    });
                }
            }
        }
        x = x_next;
    }

    Ok(DecompOutcome {
        status: DecompStatus::Undecided,
        dim_in,
        dim_out,
        p: None,
        q: None,
        w: None,
        violation: 0.0,
        iterations: opts.max_iter,
        residual: last_gap,
    })
}

/// Turns the first block of the stalled displacement into a verified witness.
fn extract_certificate(
    prob: &Problem,
    disp_p: &HermitianMatrix,
    opts: &DecompOptions,
) -> Result<Option<(HermitianMatrix, f64)>> {
    let norm = disp_p.frobenius_norm();
    if norm == 0.0 {
        return Ok(None);
    }
    let base = disp_p.scale(1.0 / norm);
    if let Some(found) = polish_and_verify(prob, &base)? {
        return Ok(Some(found));
    }
    let mut r = rng::stream(opts.seed, rng::streams::CERTIFICATE_RETRY);
    for k in 1..=CERT_RETRIES {
        let noise = rng::hermitian(&mut r, base.dim());
        let amp = 1e-3 * k as f64 / noise.frobenius_norm();
        let start = base.add(&noise.scale(amp))?;
        if let Some(found) = polish_and_verify(prob, &start)? {
            return Ok(Some(found));
        }
    }
    Ok(None)
}

/// Dykstra projection onto `{W ⪰ 0} ∩ {Γ(W) ⪰ 0}`, then an identity shift to
/// absorb the remaining negative eigenvalues (`Γ(1) = 1`), unit normalization,
/// and the independent check.
fn polish_and_verify(
    prob: &Problem,
    start: &HermitianMatrix,
) -> Result<Option<(HermitianMatrix, f64)>> {
    let n = start.dim();
    let mut w = start.clone();
    let mut c1 = HermitianMatrix::zeros(n);
    let mut c2 = HermitianMatrix::zeros(n);
    for _ in 0..POLISH_ITERS {
        let z = w.add(&c1)?;
        let a = psd_project(&z)?;
        c1 = z.sub(&a)?;
        let z = a.add(&c2)?;
        let b = prob.gamma(&psd_project(&prob.gamma(&z))?);
        c2 = z.sub(&b)?;
        let moved = b.distance(&w);
        w = b;
        if moved < 1e-15 {
            break;
        }
    }
    let lw = eigh(&w)?.min();
    let lg = eigh(&prob.gamma(&w))?.min();
    let shift = (-lw).max(-lg).max(0.0);
    if shift > 0.0 {
        w = w.add(&HermitianMatrix::identity(n).scale(shift * (1.0 + 1e-6)))?;
    }
    let norm = w.frobenius_norm();
    if norm == 0.0 {
        return Ok(None);
    }
    let w = w.scale(1.0 / norm);
    let (ok, violation) = verify_certificate(&w, prob.c, (prob.dim_in, prob.dim_out), CERT_TOL)?;
    Ok(ok.then_some((w, violation)))
}

/// Soundness check for a non-decomposability witness.
///
/// Passes iff `λ_min(W) ≥ -tol`, `λ_min(Γ(W)) ≥ -tol` and
/// `<W, C> < -tol · max(Tr C, 0)`. For any decomposable `C = P + Γ(Q)` one has
/// `<W, C> = <W, P> + <Γ(W), Q> ≥ -tol (Tr P + Tr Q) = -tol Tr C`, so a passing
/// witness refutes decomposability whatever produced it. Returns the flag and
/// `violation = -<W, C>`.
pub fn verify_certificate(
    w: &HermitianMatrix,
    c: &HermitianMatrix,
    dims: (usize, usize),
    tol: f64,
) -> Result<(bool, f64)> {
    let (dim_in, dim_out) = dims;
    if w.dim() != c.dim() || c.dim() != dim_in * dim_out {
        return Err(Error::dim("certificate, Choi matrix and dims disagree"));
    }
    let lw = eigh(w)?.min();
    let lg = eigh(&partial_transpose(w, dim_in, dim_out, Leg::B)?)?.min();
    let ip = w.pairing(c);
    let margin = tol * c.real_trace().max(0.0);
    let ok = lw >= -tol && lg >= -tol && ip < -margin;
    Ok((ok, -ip))
}
