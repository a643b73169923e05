//! Library results against independent computations written out here.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use num_complex::Complex64 as C;
use rand::Rng;

use lqsim::decomp::{decompose, is_co_cp, is_cp, zoo, DecompOptions, DecompStatus, MapSpec};
use lqsim::gns::{self, GnsSpace};
use lqsim::linalg::{
    eigh, herm_calculus, kron, max_entangled, min_eigenvalue, partial_trace, partial_transpose,
    psd_project, ComplexMatrix, HermitianMatrix, Leg, DEFAULT_RANK_TOL,
};
use lqsim::prep::ValidPreparation;
use lqsim::rng;
use lqsim::sim::{
    behavior_of, build_simulation, chsh_value, extract_u, restrict_support, Behavior, Povm,
};

type Dense = Vec<Vec<C>>;

fn dense(m: &ComplexMatrix) -> Dense {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn mul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum())
                .collect()
        })
        .collect()
}

fn dag(a: &Dense) -> Dense {
    (0..a[0].len())
        .map(|j| (0..a.len()).map(|i| a[i][j].conj()).collect())
        .collect()
}

fn trace(a: &Dense) -> C {
    (0..a.len()).map(|i| a[i][i]).sum()
}

/// `V diag(s) V^†`.
fn conj_diag(v: &Dense, s: &[f64]) -> Dense {
    let d: Dense = (0..s.len())
        .map(|i| {
            (0..s.len())
                .map(|j| {
                    if i == j {
                        C::new(s[i], 0.0)
                    } else {
                        C::new(0.0, 0.0)
                    }
                })
                .collect()
        })
        .collect();
    mul(&mul(v, &d), &dag(v))
}

fn herm(m: &Dense) -> HermitianMatrix {
    let n = m.len();
    HermitianMatrix::new(ComplexMatrix::from_fn(n, n, |i, j| m[i][j])).unwrap()
}

/// Determinant by cofactor expansion; only used for 3x3 principal minors.
fn det(a: &Dense) -> C {
    match a.len() {
        1 => a[0][0],
        2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
        n => (0..n)
            .map(|j| {
                let minor: Dense = (1..n)
                    .map(|i| (0..n).filter(|&c| c != j).map(|c| a[i][c]).collect())
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                a[0][j] * det(&minor) * sign
            })
            .sum(),
    }
}

/// PSD test by non-negativity of every principal minor (3x3).
fn min_principal_minor(a: &Dense) -> f64 {
    let idx: [&[usize]; 7] = [&[0], &[1], &[2], &[0, 1], &[0, 2], &[1, 2], &[0, 1, 2]];
    idx.iter()
        .map(|s| {
            let sub: Dense = s
                .iter()
                .map(|&i| s.iter().map(|&j| a[i][j]).collect())
                .collect();
            det(&sub).re
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn bell_partial_transpose_spectrum() {
    // Γ(|Φ+><Φ+|) = SWAP/2: eigenvalues -1/2 (singlet) and 1/2 (triplet).
    let bell = max_entangled(2).scale(0.5);
    let g = partial_transpose(&bell, 2, 2, Leg::B).unwrap();
    let e = eigh(&g).unwrap().eigenvalues;
    for (got, want) in e.iter().zip([-0.5, 0.5, 0.5, 0.5]) {
        assert!((got - want).abs() < 1e-14, "{e:?}");
    }
}

#[test]
fn transpose2_choi_is_swap() {
    let u = zoo(&MapSpec::Transpose { n: 2 }).unwrap();
    let swap = ComplexMatrix::from_fn(4, 4, |r, c| {
        let (i, k) = (r / 2, r % 2);
        let (j, l) = (c / 2, c % 2);
        C::new(if i == l && k == j { 1.0 } else { 0.0 }, 0.0)
    });
    assert!(u.choi().distance(&swap) < 1e-15);
    let (cp, min) = is_cp(&u, 1e-12).unwrap();
    assert!(!cp && (min + 1.0).abs() < 1e-14, "{min}");
}

#[test]
fn herm_calculus_multiplication() {
    let mut r = rng::stream(11, 100);
    let h = rng::density(&mut r, 4);
    let hc = herm_calculus(&h, DEFAULT_RANK_TOL).unwrap();
    let s = dense(hc.sqrt.as_matrix());
    let sq = herm(&mul(&s, &s));
    assert!(sq.distance(&h) < 1e-10);
    let absorbed = herm(&mul(
        &mul(&dense(hc.support.as_matrix()), &dense(h.as_matrix())),
        &dense(hc.support.as_matrix()),
    ));
    assert!(absorbed.distance(&h) < 1e-10);
}

#[test]
fn mixed_product_and_trace() {
    let mut r = rng::stream(12, 100);
    for _ in 0..20 {
        let (a, b) = (rng::ginibre(&mut r, 2, 2), rng::ginibre(&mut r, 3, 3));
        let (c, d) = (rng::ginibre(&mut r, 2, 2), rng::ginibre(&mut r, 3, 3));
        let lhs = &kron(&a, &b) * &kron(&c, &d);
        let rhs = kron(&(&a * &c), &(&b * &d));
        assert!(lhs.distance(&rhs) < 1e-12);
        let m = rng::hermitian(&mut r, 6);
        let ta = partial_trace(&m, 2, 3, Leg::A).unwrap();
        assert!((ta.real_trace() - m.real_trace()).abs() < 1e-12);
    }
}

#[test]
fn psd_project_sampled_minimality() {
    let mut r = rng::stream(13, 100);
    let h = rng::hermitian(&mut r, 4);
    let p = psd_project(&h).unwrap();
    let best = h.distance(&p);
    for _ in 0..100 {
        let x = rng::density(&mut r, 4).scale(r.random::<f64>() * 4.0);
        assert!(best <= h.distance(&x) + 1e-12);
    }
}

/// `ω(x, y) = Tr(d^{1/2} u(x) d^{1/2} y)` with `d = V diag(λ) V^†` and `d^{1/2}`
/// taken from the known spectrum, compared with the block-matrix evaluation.
#[test]
fn positive_map_preparation_matches_direct_formula() {
    let mut r = rng::stream(14, 100);
    for spec in [
        MapSpec::Identity { n: 3 },
        MapSpec::Transpose { n: 3 },
        MapSpec::Reduction { n: 3 },
        MapSpec::Choi3,
    ] {
        let v = dense(&rng::unitary(&mut r, 3));
        let lam = [0.5, 0.3, 0.2];
        let d = herm(&conj_diag(&v, &lam));
        let ds = conj_diag(&v, &lam.map(f64::sqrt));
        let u = zoo(&spec).unwrap();
        let prep = ValidPreparation::from_positive_map(&u, &d).unwrap();
        for _ in 0..20 {
            let x = rng::hermitian(&mut r, 3);
            let y = rng::hermitian(&mut r, 3);
            let ux = dense(u.apply(&x).unwrap().as_matrix());
            let direct = trace(&mul(&mul(&mul(&ds, &ux), &ds), &dense(y.as_matrix()))).re;
            assert!(
                (prep.eval(&x, &y).unwrap() - direct).abs() < 1e-12,
                "{}",
                spec.label()
            );
        }
        // bob marginal is d since u is unital
        assert!(prep.bob_state().unwrap().distance(&d) < 1e-10);
    }
}

#[test]
fn explicit_blocks_equivalent_to_constructed() {
    let u = zoo(&MapSpec::Identity { n: 2 }).unwrap();
    let p = ValidPreparation::from_positive_map(&u, &HermitianMatrix::maximally_mixed(2)).unwrap();
    let q = ValidPreparation::from_explicit(p.blocks().as_matrix(), 2, 2).unwrap();
    let mut r = rng::stream(15, 100);
    for _ in 0..50 {
        let (x, y) = (rng::effect(&mut r, 2), rng::effect(&mut r, 2));
        let closed = trace(&mul(&dense(x.as_matrix()), &dense(y.as_matrix()))).re / 2.0;
        assert!((p.eval(&x, &y).unwrap() - closed).abs() < 1e-14);
        assert!((q.eval(&x, &y).unwrap() - closed).abs() < 1e-14);
    }
    let (bob, alice) = p.marginals().unwrap();
    assert!(bob.distance(&HermitianMatrix::maximally_mixed(2)) < 1e-15);
    assert!(alice.distance(&HermitianMatrix::maximally_mixed(2)) < 1e-15);
}

#[test]
fn choi3_positive_but_neither_cp_nor_co_cp() {
    let u = zoo(&MapSpec::Choi3).unwrap();
    let mut r = rng::stream(16, 100);
    let mut worst = f64::INFINITY;
    for _ in 0..5000 {
        let psi = rng::unit_vector(&mut r, 3);
        let proj = HermitianMatrix::projector(&psi);
        let a = dense(proj.as_matrix());
        let direct: Dense = vec![
            vec![a[0][0] + a[2][2], -a[0][1], -a[0][2]],
            vec![-a[1][0], a[1][1] + a[0][0], -a[1][2]],
            vec![-a[2][0], -a[2][1], a[2][2] + a[1][1]],
        ];
        let via_choi = dense(u.apply(&proj).unwrap().as_matrix());
        for i in 0..3 {
            for j in 0..3 {
                assert!((direct[i][j] * 0.5 - via_choi[i][j]).norm() < 1e-14);
            }
        }
        worst = worst.min(min_principal_minor(&direct));
    }
    assert!(worst >= -1e-10, "{worst}");
    let (cp, cp_min) = is_cp(&u, 1e-12).unwrap();
    let (co, co_min) = is_co_cp(&u, 1e-12).unwrap();
    assert!(
        !cp && cp_min < -0.1 && !co && co_min < -0.1,
        "{cp_min} {co_min}"
    );
    assert!(
        u.apply(&HermitianMatrix::identity(3))
            .unwrap()
            .distance(&HermitianMatrix::identity(3))
            < 1e-15
    );
}

#[test]
fn identity_is_not_co_cp() {
    for n in 2..=4 {
        let u = zoo(&MapSpec::Identity { n }).unwrap();
        // Γ(Σ E_ij ⊗ E_ij) is the swap operator: eigenvalue -1 on antisymmetric vectors
        let (ok, min) = is_co_cp(&u, 1e-12).unwrap();
        assert!(!ok && (min + 1.0).abs() < 1e-12);
        let t = zoo(&MapSpec::Transpose { n }).unwrap();
        assert!(is_co_cp(&t, 1e-12).unwrap().0);
    }
}

#[test]
fn transpose2_feasible_point() {
    let u = zoo(&MapSpec::Transpose { n: 2 }).unwrap();
    let out = decompose(u.choi(), (2, 2), &DecompOptions::default()).unwrap();
    assert_eq!(out.status, DecompStatus::Feasible);
    assert!(out.residual <= 1e-8);
    // independent check of P + Γ(Q) = C
    let (p, q) = (out.p.unwrap(), out.q.unwrap());
    let recon = p
        .add(&partial_transpose(&q, 2, 2, Leg::B).unwrap())
        .unwrap();
    assert!(recon.distance(u.choi()) <= 1e-8);
    assert!(min_eigenvalue(&p).unwrap() >= -1e-8 && min_eigenvalue(&q).unwrap() >= -1e-8);
}

#[test]
fn gns_closed_forms() {
    let d = HermitianMatrix::real_diag(&[0.75, 0.25]);
    let g = GnsSpace::new(&d, DEFAULT_RANK_TOL).unwrap();
    let e11 = ComplexMatrix::from_fn(2, 2, |i, j| {
        C::new(if i == 0 && j == 0 { 1.0 } else { 0.0 }, 0.0)
    });
    assert!((g.inner(&e11, &e11) - C::new(0.75, 0.0)).norm() < 1e-15);
    // Δ spectrum = {λ_i / λ_j} = {3, 1, 1, 1/3}
    let m = gns::modular_data(&g).unwrap();
    let spec = eigh(&m.delta).unwrap().eigenvalues;
    for (got, want) in spec.iter().zip([1.0 / 3.0, 1.0, 1.0, 3.0]) {
        assert!((got - want).abs() < 1e-12, "{spec:?}");
    }
    // φ_1 = d with unit trace norm
    let phi1 = gns::embed(&d, &HermitianMatrix::identity(2)).unwrap();
    assert!(phi1.distance(&d) < 1e-15);
    // choi_of_v(1/2) = Σ E_ij ⊗ E_ij / 2
    let c = gns::choi_of_v(&HermitianMatrix::maximally_mixed(2)).unwrap();
    assert!(c.distance(&max_entangled(2).scale(0.5)) < 1e-15);
}

#[test]
fn duality_and_commutant_instances() {
    let d = HermitianMatrix::real_diag(&[0.7, 0.2, 0.1]);
    assert!(gns::duality_residual(&d, 100, 1).unwrap() <= 1e-12);
    let g = GnsSpace::new(&d, DEFAULT_RANK_TOL).unwrap();
    let m = gns::modular_data(&g).unwrap();
    let rep = gns::verify_tomita(&g, &m, 50, 1).unwrap();
    assert!(
        rep.commutant.residual <= 1e-9 && rep.vacuum.residual <= 1e-12,
        "{rep:?}"
    );
}

/// Purification identity: `<Ω| x ⊗ y^{T_e} |Ω> = Tr(d^{1/2} x d^{1/2} y)` with
/// `Ω` and `T_e` assembled here from a known eigenbasis.
#[test]
fn purification_identity() {
    let mut r = rng::stream(17, 100);
    for n in 2..=4 {
        let v = dense(&rng::unitary(&mut r, n));
        let mut lam: Vec<f64> = (0..n).map(|_| 0.1 + r.random::<f64>()).collect();
        let s: f64 = lam.iter().sum();
        lam.iter_mut().for_each(|l| *l /= s);
        let ds = conj_diag(&v, &lam.iter().map(|l| l.sqrt()).collect::<Vec<_>>());
        let mut omega = vec![C::new(0.0, 0.0); n * n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    omega[i * n + j] += v[i][k] * v[j][k] * lam[k].sqrt();
                }
            }
        }
        for _ in 0..200 / 3 {
            let x = dense(rng::hermitian(&mut r, n).as_matrix());
            let y = dense(rng::hermitian(&mut r, n).as_matrix());
            // y^{T_e} = V (V^† y V)^T V^†
            let inner = mul(&mul(&dag(&v), &y), &v);
            let inner_t: Dense = (0..n)
                .map(|i| (0..n).map(|j| inner[j][i]).collect())
                .collect();
            let yt = mul(&mul(&v, &inner_t), &dag(&v));
            let mut lhs = C::new(0.0, 0.0);
            for (a, oa) in omega.iter().enumerate() {
                for (b, ob) in omega.iter().enumerate() {
                    let op = x[a / n][b / n] * yt[a % n][b % n];
                    lhs += oa.conj() * op * ob;
                }
            }
            let rhs = trace(&mul(&mul(&mul(&ds, &x), &ds), &y));
            assert!((lhs - rhs).norm() < 1e-10, "{lhs} vs {rhs}");
        }
    }
}

#[test]
fn extract_u_round_trip() {
    let mut r = rng::stream(18, 100);
    for spec in [
        MapSpec::Transpose { n: 2 },
        MapSpec::Reduction { n: 3 },
        MapSpec::Choi3,
    ] {
        let u0 = zoo(&spec).unwrap();
        let d = rng::density(&mut r, spec.dim());
        let prep = ValidPreparation::from_positive_map(&u0, &d).unwrap();
        let u = extract_u(&prep).unwrap();
        assert!(u.choi().distance(u0.choi()) <= 1e-9, "{}", spec.label());
        // sampled positivity of the extracted map
        for _ in 0..500 {
            let psi = rng::unit_vector(&mut r, spec.dim());
            let img = u.apply(&HermitianMatrix::projector(&psi)).unwrap();
            assert!(min_eigenvalue(&img).unwrap() >= -1e-9);
        }
    }
    let half = zoo(&MapSpec::Transpose { n: 2 }).unwrap();
    let prep =
        ValidPreparation::from_positive_map(&half, &HermitianMatrix::maximally_mixed(2)).unwrap();
    assert!(extract_u(&prep).unwrap().choi().distance(half.choi()) <= 1e-10);
}

#[test]
fn support_compression() {
    let mut r = rng::stream(19, 100);
    let d = rng::density_of_rank(&mut r, 3, 2);
    let u = zoo(&MapSpec::Transpose { n: 3 }).unwrap();
    let prep = ValidPreparation::from_positive_map(&u, &d).unwrap();
    let res = restrict_support(&prep).unwrap();
    assert_eq!(res.rank(), 2);
    for _ in 0..100 {
        let q = rng::effect(&mut r, 3);
        let e = rng::effect(&mut r, 3);
        let pep = e.congruence(res.projector.as_matrix()).unwrap();
        let full = prep.eval(&q, &pep).unwrap();
        let small = res.prep.eval(&q, &res.compress(&e).unwrap()).unwrap();
        assert!((full - small).abs() < 1e-10);
    }
    // the model built from a rank-deficient marginal still reproduces ω
    let m = build_simulation(&prep).unwrap();
    assert_eq!(m.support_dim, 2);
    for _ in 0..100 {
        let (q, e) = (rng::effect(&mut r, 3), rng::effect(&mut r, 3));
        assert!((prep.eval(&q, &e).unwrap() - m.simulate_value(&q, &e).unwrap()).abs() < 1e-9);
    }
}

/// For `ω(Q,R) = <Φ+|Q ⊗ R|Φ+>` and observables `a·σ`, `b·σ`:
/// `E(a, b) = a_x b_x - a_y b_y + a_z b_z`.
#[test]
fn chsh_matches_bloch_formula() {
    let u = zoo(&MapSpec::Identity { n: 2 }).unwrap();
    let prep =
        ValidPreparation::from_positive_map(&u, &HermitianMatrix::maximally_mixed(2)).unwrap();
    let model = build_simulation(&prep).unwrap();
    let mut r = rng::stream(20, 100);
    let axis = |r: &mut rand_chacha::ChaCha8Rng| {
        let (t, p) = (
            r.random::<f64>() * std::f64::consts::PI,
            r.random::<f64>() * 2.0 * std::f64::consts::PI,
        );
        [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]
    };
    // identity preparation pairs as Tr(QR)/2, so ⟨a·σ, b·σ⟩ correlates as a·b
    let corr = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    for _ in 0..30 {
        let (a0, a1, b0, b1) = (axis(&mut r), axis(&mut r), axis(&mut r), axis(&mut r));
        let want = corr(a0, b0) + corr(a0, b1) + corr(a1, b0) - corr(a1, b1);
        let alice = [Povm::qubit_axis(a0), Povm::qubit_axis(a1)];
        let bob = [Povm::qubit_axis(b0), Povm::qubit_axis(b1)];
        let got = chsh_value(&behavior_of(&model, &alice, &bob).unwrap()).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
    // optimal settings: cos(π/4) per correlator
    let alice = [Povm::qubit_angle(0.0), Povm::qubit_angle(FRAC_PI_2)];
    let bob = [Povm::qubit_angle(FRAC_PI_4), Povm::qubit_angle(-FRAC_PI_4)];
    let s = chsh_value(&behavior_of(&model, &alice, &bob).unwrap()).unwrap();
    assert!((s - 2.0 * SQRT_2).abs() < 1e-12, "{s}");
}

#[test]
fn pr_box_table() {
    let pr = Behavior::pr_box();
    let mut s = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            let mut e = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    let want = if (a ^ b) == (x & y) { 0.5 } else { 0.0 };
                    assert_eq!(pr.get(a, b, x, y), want);
                    e += if a == b { want } else { -want };
                }
            }
            s += if x * y == 1 { -e } else { e };
        }
    }
    assert_eq!(s, 4.0);
    assert_eq!(chsh_value(&pr).unwrap(), s);
}
