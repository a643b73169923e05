use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    eigh, herm_calculus, kron, kron_vec, vdot, vec_norm, ComplexMatrix, HermitianMatrix, C64,
    DEFAULT_RANK_TOL,
};
use crate::prep::{ser_vec, PositiveMapDescriptor, ValidPreparation, NORMALIZATION_TOL};
use crate::rng;

/// `d^{-1/2}` is only formed when `λ_min(d)/λ_max(d)` is at least this.
pub const CONDITIONING_GUARD: f64 = 1e-8;
/// Tolerance on `|eval - simulate_value|` and on unitality of the extracted map.
pub const REPRODUCTION_TOL: f64 = 1e-9;

/// Compression of a preparation onto the support of Bob's marginal.
#[derive(Debug, Clone)]
pub struct SupportRestriction {
    pub prep: ValidPreparation,
    /// Support projector `p` on the original B space.
    pub projector: HermitianMatrix,
    /// Isometry `V` (dim_b x rank) with `V V^† = p`.
    pub isometry: ComplexMatrix,
}

impl SupportRestriction {
    pub fn rank(&self) -> usize {
        self.isometry.cols()
    }

    /// `V^† R V`.
    pub fn compress(&self, r: &HermitianMatrix) -> Result<HermitianMatrix> {
        r.congruence(&self.isometry.adjoint())
    }
}

pub fn restrict_support(prep: &ValidPreparation) -> Result<SupportRestriction> {
    let d = prep.bob_state()?;
    let hc = herm_calculus(&d, DEFAULT_RANK_TOL)?;
    if hc.rank == 0 {
        return Err(Error::DegeneratePreparation);
    }
    let n = d.dim();
    if hc.rank == n {
        return Ok(SupportRestriction {
            prep: prep.clone(),
            projector: HermitianMatrix::identity(n),
            isometry: ComplexMatrix::identity(n),
        });
    }
    // eigenvalues ascending: the support is the top `rank` eigenvectors
    let first = n - hc.rank;
    let v = ComplexMatrix::from_fn(n, hc.rank, |i, k| hc.eig.eigenvectors[(i, first + k)]);
    let c = crate::linalg::congruence_leg_b(prep.blocks().as_matrix(), prep.dim_a(), &v.adjoint())?;
    let blocks = HermitianMatrix::new(c)?;
    let restricted =
        ValidPreparation::from_explicit_renormalized(blocks.as_matrix(), prep.dim_a(), hc.rank)?
            .with_label(format!("{}|support", prep.label()));
    Ok(SupportRestriction {
        prep: restricted,
        projector: hc.support,
        isometry: v,
    })
}

/// `u(x) = d^{-1/2} ω̂(x) d^{-1/2}` for a preparation with invertible marginal.
pub fn extract_u(prep: &ValidPreparation) -> Result<PositiveMapDescriptor> {
    let d = prep.bob_state()?;
    let hc = herm_calculus(&d, DEFAULT_RANK_TOL)?;
    let ratio = hc.eig.min() / hc.eig.max();
    if ratio.is_nan() || ratio < CONDITIONING_GUARD {
        return Err(Error::IllConditioned {
            ratio,
            threshold: CONDITIONING_GUARD,
        });
    }
    let c = crate::linalg::congruence_leg_b(
        prep.blocks().as_matrix(),
        prep.dim_a(),
        hc.pinv_sqrt.as_matrix(),
    )?;
    let u = PositiveMapDescriptor::from_choi(
        prep.dim_a(),
        prep.dim_b(),
        HermitianMatrix::new(c)?,
        format!("u[{}]", prep.label()),
    )?;
    let one = u.apply(&HermitianMatrix::identity(prep.dim_a()))?;
    let defect = one.distance(&HermitianMatrix::identity(prep.dim_b()));
    if defect > REPRODUCTION_TOL {
        return Err(Error::Numerical {
            what: "unitality of extracted map".into(),
            residual: defect,
        });
    }
    Ok(u)
}

/// Quantum model of a preparation on the doubled support space `K = H ⊗ H`:
/// `ρ = |Ω><Ω|` with `Ω = Σ √λ_i e_i ⊗ e_i`, `ν_A(Q) = u(Q) ⊗ 1`,
/// `ν_B(R) = 1 ⊗ (V^† R V)^{T_e}` (transpose in the eigenbasis of `d`).
#[derive(Debug, Clone, Serialize)]
pub struct SimulationModel {
    pub dim_a: usize,
    pub dim_b: usize,
    pub support_dim: usize,
    #[serde(serialize_with = "ser_vec")]
    pub omega_vec: Vec<C64>,
    pub u: PositiveMapDescriptor,
    /// Eigenvectors of the compressed marginal, as columns.
    pub basis: ComplexMatrix,
    pub eigenvalues: Vec<f64>,
    /// `V` from the support restriction.
    pub isometry: ComplexMatrix,
    pub provenance: String,
}

pub fn build_simulation(prep: &ValidPreparation) -> Result<SimulationModel> {
    let restricted = restrict_support(prep)?;
    let u = extract_u(&restricted.prep)?;
    let d = restricted.prep.bob_state()?;
    let eig = eigh(&d)?;
    let r = d.dim();
    let mut omega = vec![C64::new(0.0, 0.0); r * r];
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let e = eig.vector(k);
        let w = l.max(0.0).sqrt();
        for (o, z) in omega.iter_mut().zip(kron_vec(&e, &e)) {
            *o += z * w;
        }
    }
    let norm = vec_norm(&omega);
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::Numerical {
            what: "purification norm".into(),
            residual: (norm - 1.0).abs(),
        });
    }
    Ok(SimulationModel {
        dim_a: prep.dim_a(),
        dim_b: prep.dim_b(),
        support_dim: r,
        omega_vec: omega,
        u,
        basis: eig.eigenvectors.clone(),
        eigenvalues: eig.eigenvalues,
        isometry: restricted.isometry,
        provenance: prep.label().to_string(),
    })
}

impl SimulationModel {
    /// `Y^{T_e} = E (E^† Y E)^T E^†`.
    pub fn transpose_in_basis(&self, y: &HermitianMatrix) -> Result<HermitianMatrix> {
        let e = &self.basis;
        let inner = y.congruence(&e.adjoint())?.transpose();
        inner.congruence(e)
    }

    pub fn nu_a(&self, q: &HermitianMatrix) -> Result<HermitianMatrix> {
        let uq = self.u.apply(q)?;
        HermitianMatrix::new(kron(
            uq.as_matrix(),
            &ComplexMatrix::identity(self.support_dim),
        ))
    }

    pub fn nu_b(&self, r: &HermitianMatrix) -> Result<HermitianMatrix> {
        if r.dim() != self.dim_b {
            return Err(Error::dim(format!("R must be {0}x{0}", self.dim_b)));
        }
        let rc = r.congruence(&self.isometry.adjoint())?;
        let rt = self.transpose_in_basis(&rc)?;
        HermitianMatrix::new(kron(
            &ComplexMatrix::identity(self.support_dim),
            rt.as_matrix(),
        ))
    }

    /// `<Ω| ν_A(Q) ν_B(R) |Ω>`.
    pub fn simulate_value(&self, q: &HermitianMatrix, r: &HermitianMatrix) -> Result<f64> {
        if q.dim() != self.dim_a {
            return Err(Error::dim(format!("Q must be {0}x{0}", self.dim_a)));
        }
        let a = self.nu_a(q)?.matvec(&self.omega_vec)?;
        let b = self.nu_b(r)?.matvec(&self.omega_vec)?;
        let z = vdot(&a, &b);
        let scale = 1.0f64.max(q.frobenius_norm() * r.frobenius_norm());
        if z.im.abs() > NORMALIZATION_TOL * scale {
            return Err(Error::Numerical {
                what: "imaginary residue in simulated value".into(),
                residual: z.im.abs(),
            });
        }
        Ok(z.re)
    }

    /// Density matrix `|Ω><Ω|` on the doubled space.
    pub fn rho(&self) -> HermitianMatrix {
        HermitianMatrix::projector(&self.omega_vec)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ReproductionReport {
    pub samples: usize,
    pub seed: u64,
    pub max_residual: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Max over random effect pairs `0 ≤ Q, R ≤ 1` of `|eval - simulate_value|`.
pub fn reproduction_check(
    prep: &ValidPreparation,
    model: &SimulationModel,
    samples: usize,
    seed: u64,
) -> Result<ReproductionReport> {
    let mut r = rng::stream(seed, rng::streams::REPRODUCTION);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let q = rng::effect(&mut r, prep.dim_a());
        let e = rng::effect(&mut r, prep.dim_b());
        let diff = (prep.eval(&q, &e)? - model.simulate_value(&q, &e)?).abs();
        worst = worst.max(diff);
    }
    Ok(ReproductionReport {
        samples,
        seed,
        max_residual: worst,
        tol: REPRODUCTION_TOL,
        pass: worst <= REPRODUCTION_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{zoo, MapSpec};

    #[test]
    fn full_rank_restriction_is_identity() {
        let u = zoo(&MapSpec::Transpose { n: 2 }).unwrap();
        let p = ValidPreparation::from_positive_map(&u, &HermitianMatrix::real_diag(&[0.3, 0.7]))
            .unwrap();
        let r = restrict_support(&p).unwrap();
        assert_eq!(r.prep, p);
        assert_eq!(r.projector, HermitianMatrix::identity(2));
    }

    #[test]
    fn rank_one_marginal() {
        let u = zoo(&MapSpec::Identity { n: 2 }).unwrap();
        let p = ValidPreparation::from_positive_map(&u, &HermitianMatrix::real_diag(&[1.0, 0.0]))
            .unwrap();
        let r = restrict_support(&p).unwrap();
        assert_eq!(r.rank(), 1);
        assert_eq!(r.prep.dim_b(), 1);
        assert!(
            r.projector
                .distance(&HermitianMatrix::real_diag(&[1.0, 0.0]))
                < 1e-14
        );
    }

    #[test]
    fn bell_purification() {
        let u = zoo(&MapSpec::Identity { n: 2 }).unwrap();
        let p =
            ValidPreparation::from_positive_map(&u, &HermitianMatrix::maximally_mixed(2)).unwrap();
        let m = build_simulation(&p).unwrap();
        // (|00> + |11>)/√2 up to the basis returned for the degenerate marginal:
        // the reduced state must be 1/2 and the model must reproduce ω.
        let rho = m.rho();
        let red = crate::linalg::partial_trace(&rho, 2, 2, crate::linalg::Leg::A).unwrap();
        assert!(red.distance(&HermitianMatrix::maximally_mixed(2)) < 1e-14);
        let one = HermitianMatrix::identity(2);
        assert!((m.simulate_value(&one, &one).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ill_conditioned_rejected() {
        let u = zoo(&MapSpec::Identity { n: 2 }).unwrap();
        let d = HermitianMatrix::real_diag(&[1.0 - 1e-9, 1e-9]);
        let p = ValidPreparation::from_positive_map(&u, &d).unwrap();
        assert!(matches!(extract_u(&p), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn degenerate_dims_rejected() {
        let u = zoo(&MapSpec::Identity { n: 2 }).unwrap();
        let p =
            ValidPreparation::from_positive_map(&u, &HermitianMatrix::maximally_mixed(2)).unwrap();
        let m = build_simulation(&p).unwrap();
        let q3 = HermitianMatrix::identity(3);
        assert!(m
            .simulate_value(&q3, &HermitianMatrix::identity(2))
            .is_err());
        assert!(m
            .simulate_value(&HermitianMatrix::identity(2), &q3)
            .is_err());
    }
}
