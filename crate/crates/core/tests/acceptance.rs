//! Acceptance gate. Runs each criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails. Built with `harness = false`
//! so the lines are always visible.

use std::f64::consts::SQRT_2;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use serde_json::Value;

use lqsim::decomp::{
    decompose, verify_certificate, zoo, DecompOptions, DecompStatus, MapSpec, CERT_TOL,
};
use lqsim::gns::{self, GnsSpace};
use lqsim::linalg::{min_eigenvalue, HermitianMatrix, DEFAULT_RANK_TOL};
use lqsim::prep::ValidPreparation;
use lqsim::rng;
use lqsim::scenario::{run_text, zoo_specs, Kind, Overrides};
use lqsim::sim::{
    behavior_of, build_simulation, chsh_family, chsh_optimal_settings, chsh_value, is_local_2222,
    random_qubit_povm, reproduction_check, Behavior,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

/// Fails unless `cond` holds; a NaN comparison fails.
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn within(elapsed: Duration, budget_s: f64) -> Result<(), String> {
    let s = elapsed.as_secs_f64();
    ensure!(s <= budget_s, "took {s:.2}s, budget {budget_s}s");
    Ok(())
}

/// Five zoo maps, ten faithful states each; choi3 is fixed at dimension 3.
fn reproduction_worst(samples: usize) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for (m, pick) in (0..5).enumerate() {
        for k in 0..10u64 {
            let n = 2 + (k as usize + m) % 3;
            let spec = match pick {
                0 => MapSpec::Identity { n },
                1 => MapSpec::Transpose { n },
                2 => MapSpec::Depolarizing { n, lambda: 0.5 },
                3 => MapSpec::Reduction { n },
                _ => MapSpec::Choi3,
            };
            let n = spec.dim();
            let d = rng::density(&mut rng::stream(100 + k, m as u64), n);
            let prep = ok(ValidPreparation::from_positive_map(&ok(zoo(&spec))?, &d))?;
            let model = ok(build_simulation(&prep))?;
            let rep = ok(reproduction_check(&prep, &model, samples, k))?;
            worst = worst.max(rep.max_residual);
        }
    }
    Ok(worst)
}

fn reproduction() -> Outcome {
    let t = Instant::now();
    let worst = reproduction_worst(500)?;
    ensure!(worst <= 1e-9, "max residual {worst:e}");
    within(t.elapsed(), 30.0)?;
    Ok(format!(
        "50 preparations x 500 pairs, max residual {worst:.2e}"
    ))
}

fn positive_not_cp() -> Outcome {
    let u = ok(zoo(&MapSpec::Transpose { n: 2 }))?;
    let prep = ok(ValidPreparation::from_positive_map(
        &u,
        &HermitianMatrix::maximally_mixed(2),
    ))?;
    let lmin = ok(min_eigenvalue(prep.blocks()))?;
    ensure!(lmin <= -0.1, "block matrix min eigenvalue {lmin}");
    let model = ok(build_simulation(&prep))?;
    let rep = ok(reproduction_check(&prep, &model, 500, 2))?;
    ensure!(
        rep.max_residual <= 1e-9,
        "reproduction residual {:e}",
        rep.max_residual
    );
    Ok(format!(
        "min eigenvalue {lmin:.3}, residual {:.2e}",
        rep.max_residual
    ))
}

fn modular() -> Outcome {
    let t = Instant::now();
    let tol = 1e-9;
    let mut worst = 0.0f64;
    for k in 0..20u64 {
        let n = 2 + (k as usize) % 3;
        let d = rng::density(&mut rng::stream(200 + k, 0), n);
        let g = ok(GnsSpace::new(&d, DEFAULT_RANK_TOL))?;
        let m = ok(gns::modular_data(&g))?;
        let rep = ok(gns::verify_tomita(&g, &m, 20, k))?;
        let checks = [
            ("polar", rep.polar.residual),
            ("involution", rep.involution.residual),
            ("vacuum", rep.vacuum.residual),
            ("commutant", rep.commutant.residual),
            ("delta spectrum", rep.delta_spectrum.residual),
            ("duality", ok(gns::duality_residual(&d, 20, k))?),
            ("contractivity", ok(gns::contractivity_excess(&d, 20, k))?),
        ];
        for (name, r) in checks {
            ensure!(r <= tol, "state {k}: {name} residual {r:e}");
            worst = worst.max(r);
        }
    }
    within(t.elapsed(), 10.0)?;
    Ok(format!("20 states, worst residual {worst:.2e}"))
}

fn cp_of_v() -> Outcome {
    let t = Instant::now();
    let mut lowest = f64::INFINITY;
    for k in 0..50u64 {
        let n = 2 + (k as usize) % 3;
        let d = rng::density(&mut rng::stream(300 + k, 0), n);
        lowest = lowest.min(ok(min_eigenvalue(&ok(gns::choi_of_v(&d))?))?);
    }
    ensure!(lowest >= -1e-12, "min eigenvalue {lowest:e}");
    within(t.elapsed(), 5.0)?;
    Ok(format!("50 states, lowest eigenvalue {lowest:.2e}"))
}

fn tsirelson() -> Outcome {
    let t = Instant::now();
    let u = ok(zoo(&MapSpec::Identity { n: 2 }))?;
    let prep = ok(ValidPreparation::from_positive_map(
        &u,
        &HermitianMatrix::maximally_mixed(2),
    ))?;
    let model = ok(build_simulation(&prep))?;
    let mut r = rng::stream(5, 0);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..200 {
        let alice = [random_qubit_povm(&mut r), random_qubit_povm(&mut r)];
        let bob = [random_qubit_povm(&mut r), random_qubit_povm(&mut r)];
        let fam = ok(chsh_family(&ok(behavior_of(&model, &alice, &bob))?))?;
        best = fam.iter().copied().fold(best, f64::max);
    }
    let bound = 2.0 * SQRT_2;
    ensure!(best <= bound + 1e-9, "random settings reach {best}");

    let (alice, bob) = chsh_optimal_settings();
    let opt = ok(chsh_value(&ok(behavior_of(&model, &alice, &bob))?))?;
    ensure!(opt >= bound - 1e-6, "optimal settings give {opt}");

    let pr = Behavior::pr_box();
    let pr_s = ok(chsh_value(&pr))?;
    ensure!((pr_s - 4.0).abs() < 1e-12, "PR box scores {pr_s}");
    ensure!(!ok(is_local_2222(&pr, 1e-10))?, "PR box judged local");

    let mut det_max = f64::NEG_INFINITY;
    for bits in 0..16usize {
        let d = Behavior::deterministic(
            [bits & 1, (bits >> 1) & 1],
            [(bits >> 2) & 1, (bits >> 3) & 1],
        );
        det_max = det_max.max(ok(chsh_value(&d))?);
    }
    ensure!(det_max <= 2.0 + 1e-12, "deterministic box scores {det_max}");
    within(t.elapsed(), 10.0)?;
    Ok(format!(
        "random max {best:.6}, optimal {opt:.9}, PR 4, deterministic max {det_max}"
    ))
}

fn decomposability() -> Outcome {
    let t = Instant::now();
    let opts = DecompOptions::default();
    let mut notes = Vec::new();
    for n in [2, 3] {
        let u = ok(zoo(&MapSpec::Transpose { n }))?;
        let out = ok(decompose(u.choi(), (n, n), &opts))?;
        ensure!(
            out.status == DecompStatus::Feasible,
            "transpose({n}) {:?}",
            out.status
        );
        ensure!(
            out.residual <= 1e-8,
            "transpose({n}) residual {:e}",
            out.residual
        );
        notes.push(format!("transpose({n}) residual {:.1e}", out.residual));
    }
    for n in [2, 3, 4] {
        for spec in [
            MapSpec::Identity { n },
            MapSpec::Depolarizing { n, lambda: 0.5 },
        ] {
            let u = ok(zoo(&spec))?;
            let out = ok(decompose(u.choi(), (n, n), &opts))?;
            ensure!(
                out.status == DecompStatus::Feasible && out.iterations <= 10,
                "{} {:?} after {} iterations",
                spec.label(),
                out.status,
                out.iterations
            );
        }
    }

    // choi3 through the scenario runner, then judged from the serialized report alone.
    let text = br#"{"kind": "decompose", "map": "choi3", "seed": 0}"#;
    let report = run_text(text, Some(Kind::Decompose), &Overrides::default())
        .map_err(|(_, e)| e.to_string())?;
    let doc: Value = ok(serde_json::from_str(&report.to_json_pretty()))?;
    let res = &doc["results"];
    ensure!(
        res["outcome"]["status"] == "infeasible",
        "choi3 status {}",
        res["outcome"]["status"]
    );
    let c: HermitianMatrix = ok(serde_json::from_value(res["choi"].clone()))?;
    let w: HermitianMatrix = ok(serde_json::from_value(res["outcome"]["w"].clone()))?;
    let dims = (
        res["dim_in"].as_u64().unwrap_or(0) as usize,
        res["dim_out"].as_u64().unwrap_or(0) as usize,
    );
    let (verified, violation) = ok(verify_certificate(&w, &c, dims, CERT_TOL))?;
    ensure!(
        verified && violation > 0.0,
        "certificate rejected, violation {violation:e}"
    );
    let recorded = res["outcome"]["violation"].as_f64().unwrap_or(f64::NAN);
    ensure!(
        (recorded - violation).abs() <= 1e-12 * violation.max(1.0),
        "recorded violation {recorded:e} vs recomputed {violation:e}"
    );
    notes.push(format!("choi3 violation {violation:.3e}"));
    within(t.elapsed(), 60.0)?;
    Ok(notes.join(", "))
}

fn mutual_exclusion() -> Outcome {
    let opts = DecompOptions::default();
    let specs = zoo_specs(&[2, 3, 4]);
    let mut witnesses = Vec::new();
    let mut outcomes = Vec::new();
    for spec in &specs {
        let u = ok(zoo(spec))?;
        let n = spec.dim();
        let out = ok(decompose(u.choi(), (n, n), &opts))?;
        let feasible = match (&out.p, &out.q) {
            (Some(p), Some(q)) => {
                let sum = ok(p.add(&ok(lqsim::linalg::partial_transpose(
                    q,
                    n,
                    n,
                    lqsim::linalg::Leg::B,
                ))?))?;
                sum.distance(u.choi()) <= opts.tol_feas
                    && ok(min_eigenvalue(p))? >= -opts.tol_feas
                    && ok(min_eigenvalue(q))? >= -opts.tol_feas
            }
            _ => false,
        };
        let certified = match &out.w {
            Some(w) => ok(verify_certificate(w, u.choi(), (n, n), CERT_TOL))?.0,
            None => false,
        };
        ensure!(
            feasible != certified,
            "{}: feasible {feasible}, certified {certified}",
            spec.label()
        );
        if let Some(w) = out.w.clone().filter(|_| certified) {
            witnesses.push((n, w));
        }
        outcomes.push((spec.label(), n, u, feasible));
    }
    // A witness refuting one map must not refute any map shown decomposable.
    for (label, n, u, feasible) in &outcomes {
        for (wn, w) in &witnesses {
            if *feasible && wn == n {
                let (hit, _) = ok(verify_certificate(w, u.choi(), (*n, *n), CERT_TOL))?;
                ensure!(!hit, "{label}: decomposable yet refuted by a witness");
            }
        }
    }
    let infeasible = outcomes.iter().filter(|o| !o.3).count();
    Ok(format!(
        "{} Choi matrices, {infeasible} certified infeasible",
        outcomes.len()
    ))
}

fn determinism() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut names: Vec<_> = ok(fs::read_dir(&dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    ensure!(!names.is_empty(), "no scenarios under {}", dir.display());
    for path in &names {
        let text = ok(fs::read(path))?;
        for seed in [None, Some(99)] {
            let o = Overrides {
                seed,
                ..Overrides::default()
            };
            let run =
                || run_text(&text, None, &o).map_err(|(_, e)| format!("{}: {e}", path.display()));
            let (a, b) = (run()?, run()?);
            ensure!(
                a.results_bytes() == b.results_bytes(),
                "{} differs between runs",
                path.display()
            );
        }
    }
    Ok(format!("{} scenarios, two seeds each", names.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("reproduction", reproduction),
        ("positive but not CP", positive_not_cp),
        ("modular suite", modular),
        ("CP of v", cp_of_v),
        ("Tsirelson", tsirelson),
        ("decomposability", decomposability),
        ("mutual exclusion", mutual_exclusion),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {}: {tag} {name} ({:.2}s): {detail}",
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
