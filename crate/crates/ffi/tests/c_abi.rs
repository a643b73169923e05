use std::ffi::{CStr, CString};
use std::ptr;

use lqsim_ffi::*;

fn interleave(m: &[[f64; 2]]) -> Vec<f64> {
    m.iter().flat_map(|z| [z[0], z[1]]).collect()
}

fn real_diag(d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut out = vec![0.0; 2 * n * n];
    for (i, v) in d.iter().enumerate() {
        out[2 * (i * n + i)] = *v;
    }
    out
}

fn last_error() -> String {
    let p = lq_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn transpose_preparation_round_trip() {
    let name = CString::new("transpose").unwrap();
    let state = real_diag(&[0.5, 0.5]);
    let mut prep = ptr::null_mut();
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(
            lq_preparation_from_map(name.as_ptr(), 2, f64::NAN, state.as_ptr(), &mut prep),
            LqStatus::Ok
        );
        let (mut a, mut b) = (0usize, 0usize);
        assert_eq!(lq_preparation_dims(prep, &mut a, &mut b), LqStatus::Ok);
        assert_eq!((a, b), (2, 2));
        assert_eq!(lq_model_build(prep, &mut model), LqStatus::Ok);
        let mut support = 0usize;
        assert_eq!(lq_model_support_dim(model, &mut support), LqStatus::Ok);
        assert_eq!(support, 2);

        // |+><+| against |+><+|: Tr(Q^T R)/2 = 1/2
        let plus = interleave(&[[0.5, 0.0], [0.5, 0.0], [0.5, 0.0], [0.5, 0.0]]);
        // |+i><+i| transposes to |-i><-i|, orthogonal to |+i><+i|
        let plus_i = interleave(&[[0.5, 0.0], [0.0, -0.5], [0.0, 0.5], [0.5, 0.0]]);
        let (mut e, mut s) = (0.0, 0.0);
        assert_eq!(
            lq_preparation_eval(prep, plus.as_ptr(), plus.as_ptr(), &mut e),
            LqStatus::Ok
        );
        assert_eq!(
            lq_model_simulate_value(model, plus.as_ptr(), plus.as_ptr(), &mut s),
            LqStatus::Ok
        );
        assert!((e - 0.5).abs() < 1e-14 && (s - e).abs() < 1e-12);
        assert_eq!(
            lq_preparation_eval(prep, plus_i.as_ptr(), plus_i.as_ptr(), &mut e),
            LqStatus::Ok
        );
        assert_eq!(
            lq_model_simulate_value(model, plus_i.as_ptr(), plus_i.as_ptr(), &mut s),
            LqStatus::Ok
        );
        assert!(e.abs() < 1e-14 && s.abs() < 1e-12);

        lq_model_free(model);
        lq_preparation_free(prep);
    }
}

#[test]
fn errors_set_status_and_message() {
    let name = CString::new("swap").unwrap();
    let state = real_diag(&[0.5, 0.5]);
    let mut prep = ptr::null_mut();
    unsafe {
        let st = lq_preparation_from_map(name.as_ptr(), 2, f64::NAN, state.as_ptr(), &mut prep);
        assert_eq!(st, LqStatus::Schema);
        assert!(last_error().contains("swap"));
        assert!(prep.is_null());

        let id = CString::new("identity").unwrap();
        let bad_state = real_diag(&[0.7, 0.7]);
        let st = lq_preparation_from_map(id.as_ptr(), 2, f64::NAN, bad_state.as_ptr(), &mut prep);
        assert_eq!(st, LqStatus::InvalidArgument);

        assert_eq!(
            lq_preparation_from_map(ptr::null(), 2, f64::NAN, state.as_ptr(), &mut prep),
            LqStatus::NullPointer
        );
        let mut out = 0.0;
        assert_eq!(
            lq_preparation_eval(ptr::null(), state.as_ptr(), state.as_ptr(), &mut out),
            LqStatus::NullPointer
        );
    }
    // success clears the message
    assert!(!lq_version().is_null());
    let json = CString::new(
        r#"{"positive_map_state": {"map": "identity", "state": {"diag": [0.5, 0.5]}}}"#,
    )
    .unwrap();
    unsafe {
        assert_eq!(
            lq_preparation_from_json(json.as_ptr(), &mut prep),
            LqStatus::Ok
        );
        assert!(lq_last_error_message().is_null());
        lq_preparation_free(prep);
    }
}

#[test]
fn choi_map_outcome() {
    let name = CString::new("choi3").unwrap();
    let mut o = ptr::null_mut();
    unsafe {
        assert_eq!(
            lq_decompose_map(name.as_ptr(), 3, f64::NAN, 0, 1, &mut o),
            LqStatus::Ok
        );
        let mut st = LqDecompStatus::Undecided;
        assert_eq!(lq_outcome_status(o, &mut st), LqStatus::Ok);
        assert_eq!(st, LqDecompStatus::Infeasible);
        let mut v = 0.0;
        assert_eq!(lq_outcome_violation(o, &mut v), LqStatus::Ok);
        assert!(v > 0.0);
        let mut json = ptr::null_mut();
        assert_eq!(lq_outcome_to_json(o, &mut json), LqStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        lq_string_free(json);
        let parsed: lqsim::decomp::DecompOutcome = serde_json::from_str(&text).unwrap();
        assert!(parsed.w.is_some());
        lq_outcome_free(o);
    }
}

#[test]
fn scenario_exit_codes() {
    let run = |doc: &str| unsafe {
        let c = CString::new(doc).unwrap();
        let mut report = ptr::null_mut();
        let mut code = -1;
        assert_eq!(
            lq_run_scenario_json(c.as_ptr(), &mut report, &mut code),
            LqStatus::Ok
        );
        let text = CStr::from_ptr(report).to_str().unwrap().to_owned();
        lq_string_free(report);
        (
            code,
            serde_json::from_str::<serde_json::Value>(&text).unwrap(),
        )
    };
    let (code, doc) = run(r#"{"kind": "chsh", "behavior": "pr_box"}"#);
    assert_eq!(code, 0);
    assert_eq!(doc["results"]["chsh"]["value"], serde_json::json!(4.0));
    let (code, _) = run(r#"{"kind": "chsh", "behavior": "pr_box", "expect": {"is_local": true}}"#);
    assert_eq!(code, 2);
    let (code, doc) = run(r#"{"kind": "simulate"}"#);
    assert_eq!(code, 1);
    assert_eq!(doc["error"]["path"], serde_json::json!("preparation"));
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/lqsim.h");
    for f in [
        "lq_last_error_message",
        "lq_version",
        "lq_string_free",
        "lq_preparation_from_json",
        "lq_preparation_from_map",
        "lq_preparation_dims",
        "lq_preparation_eval",
        "lq_preparation_free",
        "lq_model_build",
        "lq_model_support_dim",
        "lq_model_simulate_value",
        "lq_model_free",
        "lq_decompose_map",
        "lq_outcome_status",
        "lq_outcome_violation",
        "lq_outcome_iterations",
        "lq_outcome_to_json",
        "lq_outcome_free",
        "lq_run_scenario_json",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct LqPreparation LqPreparation;"));
}
