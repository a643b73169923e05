use std::f64::consts::SQRT_2;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use super::{
    DecompSource, Kind, Measurements, PrepSource, Scenario, Tolerances, SCHEMA_VERSION,
    TOOL_VERSION,
};
use crate::decomp::{decompose, verify_certificate, zoo, DecompOutcome, DecompStatus, MapSpec};
use crate::error::{Error, Result};
use crate::gns::{self, Check, GnsSpace};
use crate::linalg::{min_eigenvalue, partial_transpose, HermitianMatrix, Leg, DEFAULT_RANK_TOL};
use crate::prep::ValidPreparation;
use crate::sim::{
    behavior_of, build_simulation, chsh_family, chsh_value, is_local_2222, ns_check,
    reproduction_check, Behavior, Povm, SimulationModel,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

const DEFAULT_SIM_SAMPLES: usize = 500;
const DEFAULT_MODULAR_SAMPLES: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub kind: Kind,
    pub scenario: Value,
    /// Deterministic payload: a function of the scenario and seed only.
    pub results: Value,
    pub pass: bool,
    pub wall_time: f64,
    /// Behavior table for CSV export, when the pipeline produced one.
    #[serde(skip)]
    pub behavior: Option<Behavior>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }

    pub fn results_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.results).expect("JSON values always serialize")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Structured error document written in place of a report.
pub fn error_document(kind: Option<Kind>, err: &Error) -> Value {
    let mut e = json!({"kind": err.kind(), "message": err.to_string()});
    if let Error::Schema { path, .. } = err {
        e["path"] = Value::from(path.as_str());
    }
    json!({
        "schema_version": SCHEMA_VERSION,
        "tool_version": TOOL_VERSION,
        "kind": kind.map(|k| k.as_str()),
        "pass": false,
        "error": e,
    })
}

struct Outcome {
    results: Value,
    pass: bool,
    behavior: Option<Behavior>,
}

pub fn execute(s: &Scenario) -> Result<Report> {
    let start = Instant::now();
    let out = match s.kind {
        Kind::Simulate => run_simulate(s)?,
        Kind::VerifyModular => run_modular(s)?,
        Kind::Decompose => run_decompose(s)?,
        Kind::Chsh => run_chsh(s)?,
        Kind::ZooReport => run_zoo(s)?,
    };
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION,
        kind: s.kind,
        scenario: s.echo.clone(),
        results: out.results,
        pass: out.pass,
        wall_time: start.elapsed().as_secs_f64(),
        behavior: out.behavior,
    })
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report types serialize")
}

pub fn build_preparation(src: &PrepSource) -> Result<ValidPreparation> {
    match src {
        PrepSource::PositiveMapState { map, state } => {
            let u = zoo(map)?;
            Ok(ValidPreparation::from_positive_map(&u, state)?
                .with_label(format!("{}@state", map.label())))
        }
        PrepSource::Explicit {
            dim_a,
            dim_b,
            blocks,
        } => Ok(ValidPreparation::from_explicit(blocks, *dim_a, *dim_b)?.with_label("explicit")),
    }
}

#[derive(Serialize)]
struct PrepSummary {
    label: String,
    dim_a: usize,
    dim_b: usize,
    /// `λ_min` of the block matrix; negative means the induced map is not CP.
    min_block_eigenvalue: f64,
    completely_positive: bool,
    pure_tensor_positivity: crate::prep::PositivityReport,
}

fn summarize(
    prep: &ValidPreparation,
    seed: u64,
    samples: usize,
    tol: &Tolerances,
) -> Result<PrepSummary> {
    let min = min_eigenvalue(prep.blocks())?;
    let mut pos = prep.sample_pure_tensor_positivity(samples, seed);
    pos.tol = tol.positivity;
    pos.passed = pos.min_value >= -tol.positivity;
    Ok(PrepSummary {
        label: prep.label().to_string(),
        dim_a: prep.dim_a(),
        dim_b: prep.dim_b(),
        min_block_eigenvalue: min,
        completely_positive: min >= -tol.positivity,
        pure_tensor_positivity: pos,
    })
}

#[derive(Serialize)]
struct ModelSummary {
    support_dim: usize,
    eigenvalues: Vec<f64>,
    omega_norm_defect: f64,
}

fn model_summary(m: &SimulationModel) -> ModelSummary {
    ModelSummary {
        support_dim: m.support_dim,
        eigenvalues: m.eigenvalues.clone(),
        omega_norm_defect: (crate::linalg::vec_norm(&m.omega_vec) - 1.0).abs(),
    }
}

/// Max over POVMs of the distance of `Σ ν(E)` from `1` and of the most
/// negative eigenvalue of any `ν(E)`.
fn preservation(
    povms: &[Povm],
    nu: impl Fn(&HermitianMatrix) -> Result<HermitianMatrix>,
    tol: f64,
) -> Result<Value> {
    let mut sum_defect = 0.0f64;
    let mut min_eig = f64::INFINITY;
    for p in povms {
        let mut sum: Option<HermitianMatrix> = None;
        for e in &p.effects {
            let img = nu(e)?;
            min_eig = min_eig.min(min_eigenvalue(&img)?);
            sum = Some(match sum {
                None => img,
                Some(acc) => acc.add(&img)?,
            });
        }
        let sum = sum.expect("validated POVMs are non-empty");
        sum_defect = sum_defect.max(sum.distance(&HermitianMatrix::identity(sum.dim())));
    }
    Ok(json!({
        "sum_defect": sum_defect,
        "min_eigenvalue": min_eig,
        "pass": sum_defect <= tol && min_eig >= -tol,
    }))
}

#[derive(Serialize)]
struct ChshSummary {
    value: f64,
    facets: [f64; 8],
    is_local: Option<bool>,
}

fn chsh_summary(b: &Behavior, ns_ok: bool, tol: f64) -> Result<Option<ChshSummary>> {
    if !b.is_2222() {
        return Ok(None);
    }
    Ok(Some(ChshSummary {
        value: chsh_value(b)?,
        facets: chsh_family(b)?,
        is_local: if ns_ok {
            Some(is_local_2222(b, tol)?)
        } else {
            None
        },
    }))
}

fn check_expectations(s: &Scenario, chsh: Option<&ChshSummary>, checks: &mut Vec<(String, bool)>) {
    let e = &s.expect;
    if let Some(want) = e.is_local {
        let got = chsh.and_then(|c| c.is_local);
        checks.push(("expect.is_local".into(), got == Some(want)));
    }
    if let Some(lo) = e.chsh_min {
        checks.push((
            "expect.chsh_min".into(),
            chsh.is_some_and(|c| c.value >= lo),
        ));
    }
    if let Some(hi) = e.chsh_max {
        checks.push((
            "expect.chsh_max".into(),
            chsh.is_some_and(|c| c.value <= hi),
        ));
    }
}

fn checks_value(checks: &[(String, bool)]) -> (Value, bool) {
    let mut map = serde_json::Map::new();
    for (k, v) in checks {
        map.insert(k.clone(), Value::from(*v));
    }
    (Value::Object(map), checks.iter().all(|(_, v)| *v))
}

fn behavior_block(
    s: &Scenario,
    model: &SimulationModel,
    m: &Measurements,
    results: &mut serde_json::Map<String, Value>,
    checks: &mut Vec<(String, bool)>,
) -> Result<Behavior> {
    let t = &s.tolerances;
    let b = behavior_of(model, &m.alice, &m.bob)?;
    let ns = ns_check(&b, t.ns);
    let chsh = chsh_summary(&b, ns.pass, t.ns)?;
    checks.push(("ns".into(), ns.pass));
    if let Some(c) = &chsh {
        checks.push((
            "tsirelson".into(),
            c.value.abs() <= 2.0 * SQRT_2 + t.tsirelson,
        ));
    }
    check_expectations(s, chsh.as_ref(), checks);
    results.insert("behavior".into(), to_value(&b));
    results.insert("ns".into(), to_value(&ns));
    if let Some(c) = &chsh {
        results.insert("chsh".into(), to_value(c));
    }
    Ok(b)
}

fn run_simulate(s: &Scenario) -> Result<Outcome> {
    let t = &s.tolerances;
    let src = s.preparation.as_ref().expect("validated at parse time");
    let prep = build_preparation(src)?;
    let samples = s.samples.unwrap_or(DEFAULT_SIM_SAMPLES);
    let summary = summarize(&prep, s.seed, samples, t)?;
    let model = build_simulation(&prep)?;
    let mut rep = reproduction_check(&prep, &model, samples, s.seed)?;
    rep.tol = t.reproduction;
    rep.pass = rep.max_residual <= t.reproduction;

    let mut checks = vec![
        (
            "pure_tensor_positivity".to_string(),
            summary.pure_tensor_positivity.passed,
        ),
        ("reproduction".to_string(), rep.pass),
    ];
    let mut results = serde_json::Map::new();
    results.insert("tolerances".into(), to_value(t));
    results.insert("preparation".into(), to_value(&summary));
    results.insert("model".into(), to_value(&model_summary(&model)));
    results.insert("reproduction".into(), to_value(&rep));

    let mut behavior = None;
    if let Some(m) = &s.measurements {
        let pa = preservation(&m.alice, |q| model.nu_a(q), t.reproduction)?;
        let pb = preservation(&m.bob, |r| model.nu_b(r), t.reproduction)?;
        checks.push((
            "measurement_preservation".into(),
            pa["pass"] == true && pb["pass"] == true,
        ));
        results.insert(
            "measurement_preservation".into(),
            json!({"alice": pa, "bob": pb}),
        );
        behavior = Some(behavior_block(s, &model, m, &mut results, &mut checks)?);
    }
    let (cv, pass) = checks_value(&checks);
    results.insert("checks".into(), cv);
    Ok(Outcome {
        results: Value::Object(results),
        pass,
        behavior,
    })
}

fn run_chsh(s: &Scenario) -> Result<Outcome> {
    let t = &s.tolerances;
    let mut results = serde_json::Map::new();
    results.insert("tolerances".into(), to_value(t));
    let mut checks = Vec::new();
    let behavior = match (&s.behavior, &s.preparation) {
        (Some(b), _) => {
            let ns = ns_check(b, t.ns);
            let chsh = chsh_summary(b, ns.pass, t.ns)?;
            checks.push(("ns".into(), ns.pass));
            match &chsh {
                Some(c) => checks.push(("chsh_bound".into(), c.value.abs() <= 4.0 + t.ns)),
                None => return Err(Error::dim("chsh needs a 2222 behavior")),
            }
            check_expectations(s, chsh.as_ref(), &mut checks);
            results.insert("behavior".into(), to_value(b));
            results.insert("ns".into(), to_value(&ns));
            results.insert("chsh".into(), to_value(&chsh));
            b.clone()
        }
        (None, Some(src)) => {
            let prep = build_preparation(src)?;
            let model = build_simulation(&prep)?;
            let m = s.measurements.as_ref().expect("defaulted at parse time");
            let b = behavior_block(s, &model, m, &mut results, &mut checks)?;
            if !b.is_2222() {
                return Err(Error::dim("chsh needs two binary measurements per side"));
            }
            b
        }
        (None, None) => unreachable!("validated at parse time"),
    };
    let (cv, pass) = checks_value(&checks);
    results.insert("checks".into(), cv);
    Ok(Outcome {
        results: Value::Object(results),
        pass,
        behavior: Some(behavior),
    })
}

#[derive(Serialize)]
struct ModularSummary {
    source: String,
    n: usize,
    tomita: gns::TomitaReport,
    duality: Check,
    contractivity_excess: Check,
    choi_of_v_min_eigenvalue: f64,
    v_completely_positive: bool,
}

pub(crate) fn modular_suite(
    d: &HermitianMatrix,
    samples: usize,
    seed: u64,
    t: &Tolerances,
) -> Result<(Value, bool)> {
    let g = GnsSpace::new(d, DEFAULT_RANK_TOL)?;
    let m = gns::modular_data(&g)?;
    let tomita = gns::verify_tomita(&g, &m, samples, seed)?.with_tol(t.modular);
    let duality = Check::new(gns::duality_residual(d, samples, seed)?, t.modular);
    // contractive iff the excess is non-positive; allow rounding
    let contractivity = Check::new(gns::contractivity_excess(d, samples, seed)?, t.modular);
    let cv = min_eigenvalue(&gns::choi_of_v(d)?)?;
    let cp = cv >= -t.cp_of_v;
    let pass = tomita.pass && duality.pass && contractivity.pass && cp;
    let summary = ModularSummary {
        source: String::new(),
        n: d.dim(),
        tomita,
        duality,
        contractivity_excess: contractivity,
        choi_of_v_min_eigenvalue: cv,
        v_completely_positive: cp,
    };
    Ok((to_value(&summary), pass))
}

fn run_modular(s: &Scenario) -> Result<Outcome> {
    let (d, source) = match (&s.state, &s.preparation) {
        (Some(d), _) => (d.clone(), "state".to_string()),
        (None, Some(src)) => {
            let prep = build_preparation(src)?;
            (prep.bob_state()?, format!("marginal of {}", prep.label()))
        }
        (None, None) => unreachable!("validated at parse time"),
    };
    crate::prep::check_state(&d)?;
    let samples = s.samples.unwrap_or(DEFAULT_MODULAR_SAMPLES);
    let (mut v, pass) = modular_suite(&d, samples, s.seed, &s.tolerances)?;
    v["source"] = Value::from(source);
    v["tolerances"] = to_value(&s.tolerances);
    v["state"] = to_value(&d);
    Ok(Outcome {
        results: v,
        pass,
        behavior: None,
    })
}

/// Independent re-check of a decomposition outcome against its input.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OutcomeAudit {
    /// Feasible: `||P + Γ(Q) - C||_F`, `λ_min(P)`, `λ_min(Q)`.
    pub constraint_residual: Option<f64>,
    pub min_eig_p: Option<f64>,
    pub min_eig_q: Option<f64>,
    /// Infeasible: whether the witness verifies.
    pub certificate_verified: Option<bool>,
    pub violation: Option<f64>,
    pub consistent: bool,
}

pub fn audit_outcome(
    out: &DecompOutcome,
    c: &HermitianMatrix,
    tol_feas: f64,
    cert_tol: f64,
) -> Result<OutcomeAudit> {
    let dims = (out.dim_in, out.dim_out);
    let mut a = OutcomeAudit {
        constraint_residual: None,
        min_eig_p: None,
        min_eig_q: None,
        certificate_verified: None,
        violation: None,
        consistent: false,
    };
    match out.status {
        DecompStatus::Feasible => {
            let (p, q) = match (&out.p, &out.q) {
                (Some(p), Some(q)) => (p, q),
                _ => return Ok(a),
            };
            let gq = partial_transpose(q, dims.0, dims.1, Leg::B)?;
            let r = p.add(&gq)?.sub(c)?.frobenius_norm();
            let (lp, lq) = (min_eigenvalue(p)?, min_eigenvalue(q)?);
            a.constraint_residual = Some(r);
            a.min_eig_p = Some(lp);
            a.min_eig_q = Some(lq);
            a.consistent = r <= tol_feas && lp >= -tol_feas && lq >= -tol_feas && out.w.is_none();
        }
        DecompStatus::Infeasible => {
            let Some(w) = &out.w else { return Ok(a) };
            let (ok, viol) = verify_certificate(w, c, dims, cert_tol)?;
            a.certificate_verified = Some(ok);
            a.violation = Some(viol);
            a.consistent = ok && viol > 0.0 && out.p.is_none();
        }
        DecompStatus::Undecided => {}
    }
    Ok(a)
}

fn decompose_source(src: &DecompSource) -> Result<(String, HermitianMatrix, (usize, usize))> {
    Ok(match src {
        DecompSource::Map(spec) => {
            let u = zoo(spec)?;
            (spec.label(), u.choi().clone(), (u.dim_in(), u.dim_out()))
        }
        DecompSource::Choi {
            dim_in,
            dim_out,
            matrix,
        } => ("choi".into(), matrix.clone(), (*dim_in, *dim_out)),
        DecompSource::Preparation(p) => {
            let prep = build_preparation(p)?;
            (
                prep.label().to_string(),
                prep.blocks().clone(),
                (prep.dim_a(), prep.dim_b()),
            )
        }
    })
}

fn decompose_entry(
    label: &str,
    c: &HermitianMatrix,
    dims: (usize, usize),
    s: &Scenario,
) -> Result<(Value, DecompOutcome, OutcomeAudit)> {
    let out = decompose(c, dims, &s.solver)?;
    let audit = audit_outcome(&out, c, s.solver.tol_feas, s.tolerances.certificate)?;
    let tol = s.tolerances.positivity;
    let cp_min = min_eigenvalue(c)?;
    let co_min = min_eigenvalue(&partial_transpose(c, dims.0, dims.1, Leg::B)?)?;
    let v = json!({
        "label": label,
        "dim_in": dims.0,
        "dim_out": dims.1,
        "choi": to_value(c),
        "cp": {"holds": cp_min >= -tol, "min_eigenvalue": cp_min},
        "co_cp": {"holds": co_min >= -tol, "min_eigenvalue": co_min},
        "outcome": to_value(&out),
        "audit": to_value(&audit),
    });
    Ok((v, out, audit))
}

fn run_decompose(s: &Scenario) -> Result<Outcome> {
    let src = s.decomp_source.as_ref().expect("validated at parse time");
    let (label, c, dims) = decompose_source(src)?;
    let (mut v, out, audit) = decompose_entry(&label, &c, dims, s)?;
    let mut checks = vec![
        ("decided".to_string(), out.status != DecompStatus::Undecided),
        ("audit".to_string(), audit.consistent),
    ];
    if let Some(want) = s.expect.status {
        checks.push(("expect.status".into(), out.status == want));
    }
    let (cv, pass) = checks_value(&checks);
    v["solver_opts"] = to_value(&s.solver);
    v["tolerances"] = to_value(&s.tolerances);
    v["checks"] = cv;
    Ok(Outcome {
        results: v,
        pass,
        behavior: None,
    })
}

/// Known decomposability of the zoo: everything but the Choi map is
/// decomposable.
fn known_status(spec: &MapSpec) -> DecompStatus {
    match spec {
        MapSpec::Choi3 => DecompStatus::Infeasible,
        _ => DecompStatus::Feasible,
    }
}

pub fn zoo_specs(dims: &[usize]) -> Vec<MapSpec> {
    let mut specs = Vec::new();
    for &n in dims {
        specs.extend(
            MapSpec::family(n)
                .into_iter()
                .filter(|m| !matches!(m, MapSpec::Choi3)),
        );
    }
    specs.push(MapSpec::Choi3);
    specs
}

fn run_zoo(s: &Scenario) -> Result<Outcome> {
    let mut entries = Vec::new();
    let mut pass = true;
    for spec in zoo_specs(&s.zoo_dims) {
        let u = zoo(&spec)?;
        let (mut v, out, audit) =
            decompose_entry(&spec.label(), u.choi(), (u.dim_in(), u.dim_out()), s)?;
        let feasible = out.status == DecompStatus::Feasible && audit.consistent;
        let certified = audit.certificate_verified == Some(true);
        let exclusive = feasible != certified;
        let matches_known = out.status == known_status(&spec);
        pass &= exclusive && matches_known;
        v["map"] = to_value(&spec);
        v["exclusive"] = Value::from(exclusive);
        v["matches_known"] = Value::from(matches_known);
        entries.push(v);
    }
    Ok(Outcome {
        results: json!({
            "dims": s.zoo_dims,
            "solver_opts": to_value(&s.solver),
            "tolerances": to_value(&s.tolerances),
            "entries": entries,
        }),
        pass,
        behavior: None,
    })
}

#[cfg(test)]
mod tests {
    use super::super::parse_scenario;
    use super::*;

    fn run(v: Value) -> Report {
        execute(&parse_scenario(v.to_string().as_bytes(), None).unwrap()).unwrap()
    }

    #[test]
    fn simulate_transpose_passes() {
        let r = run(json!({
            "kind": "simulate", "seed": 1, "samples": 100,
            "preparation": {"positive_map_state": {"map": "transpose", "params": {"n": 2}, "state": "maximally_mixed"}},
            "measurements": "chsh_optimal"
        }));
        assert!(r.pass, "{}", r.to_json_pretty());
        assert!(
            r.results["preparation"]["min_block_eigenvalue"]
                .as_f64()
                .unwrap()
                < -0.1
        );
        assert!(r.behavior.is_some());
    }

    #[test]
    fn chsh_pr_box() {
        let r = run(json!({"kind": "chsh", "behavior": "pr_box", "expect": {"is_local": false}}));
        assert!(r.pass);
        assert_eq!(r.results["chsh"]["value"], json!(4.0));
        assert_eq!(r.results["chsh"]["is_local"], json!(false));
        assert_eq!(r.results["ns"]["pass"], json!(true));
    }

    #[test]
    fn expectation_mismatch_fails() {
        let r = run(json!({"kind": "chsh", "behavior": "pr_box", "expect": {"is_local": true}}));
        assert!(!r.pass);
        assert_eq!(r.exit_code(), EXIT_FAIL);
    }

    #[test]
    fn decompose_choi3_infeasible() {
        let r =
            run(json!({"kind": "decompose", "map": "choi3", "expect": {"status": "infeasible"}}));
        assert!(r.pass, "{}", r.to_json_pretty());
        assert!(r.results["outcome"]["w"].is_object());
        let r = run(json!({"kind": "decompose", "map": "choi3", "expect": {"status": "feasible"}}));
        assert_eq!(r.exit_code(), EXIT_FAIL);
    }

    #[test]
    fn modular_from_marginal() {
        let r = run(json!({
            "kind": "verify_modular", "seed": 2, "samples": 10,
            "preparation": {"positive_map_state": {"map": "identity", "state": {"diag": [0.2, 0.3, 0.5]}}}
        }));
        assert!(r.pass, "{}", r.to_json_pretty());
    }

    #[test]
    fn non_faithful_marginal_is_an_error() {
        let s = parse_scenario(
            json!({"kind": "verify_modular", "state": {"diag": [1.0, 0.0]}})
                .to_string()
                .as_bytes(),
            None,
        )
        .unwrap();
        assert!(matches!(execute(&s), Err(Error::NotFaithful { .. })));
    }

    #[test]
    fn error_document_shape() {
        let e = Error::Schema {
            path: "a.b".into(),
            message: "m".into(),
        };
        let d = error_document(Some(Kind::Chsh), &e);
        assert_eq!(d["error"]["path"], json!("a.b"));
        assert_eq!(d["kind"], json!("chsh"));
    }
}
