//! C ABI over `lqsim`.
//!
//! Conventions:
//! - Every fallible function returns an [`LqStatus`]; `LQ_STATUS_OK` is zero.
//! - On failure a thread-local message is kept until the next call on the
//!   same thread and can be read with [`lq_last_error_message`].
//! - Handles are opaque and owned by the caller; release each with its
//!   `_free` function. Strings returned through out-parameters are released
//!   with [`lq_string_free`].
//! - Matrices are passed as `2 * n * n` doubles: row-major, each entry as
//!   `re, im`.
//! - Panics never cross the boundary; they surface as `LQ_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lqsim::decomp::{decompose, zoo, DecompOptions, DecompOutcome, DecompStatus, MapSpec};
use lqsim::linalg::{ComplexMatrix, HermitianMatrix, C64};
use lqsim::prep::ValidPreparation;
use lqsim::scenario::{self, build_preparation, error_document, Overrides, EXIT_ERROR};
use lqsim::sim::{build_simulation, SimulationModel};
use lqsim::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    InvalidInput = 4,
    Numerical = 5,
    Schema = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LqDecompStatus {
    Feasible = 0,
    Infeasible = 1,
    Undecided = 2,
}

/// Opaque valid preparation.
pub struct LqPreparation(ValidPreparation);

/// Opaque simulation model.
pub struct LqModel(SimulationModel);

/// Opaque decomposition outcome.
pub struct LqOutcome(DecompOutcome);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> LqStatus {
    match e {
        Error::Dimension(_) => LqStatus::Dimension,
        Error::SolverFailure { .. } | Error::Numerical { .. } | Error::IllConditioned { .. } => {
            LqStatus::Numerical
        }
        Error::Schema { .. } | Error::UnknownMap(_) => LqStatus::Schema,
        Error::Contract(_) | Error::Io(_) => LqStatus::InvalidArgument,
        _ => LqStatus::InvalidInput,
    }
}

struct Fail(LqStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(LqStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LqStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LqStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LqStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(LqStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn hermitian_arg(p: *const f64, n: usize, what: &str) -> Result<HermitianMatrix, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let raw = std::slice::from_raw_parts(p, 2 * n * n);
    let data: Vec<C64> = raw.chunks_exact(2).map(|z| C64::new(z[0], z[1])).collect();
    let m = ComplexMatrix::from_vec(n, n, data)?;
    HermitianMatrix::strict(m, 1e-10)
        .map_err(|e| Fail(LqStatus::InvalidInput, format!("{what}: {e}")))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("interior NULs replaced")
        .into_raw()
}

fn map_spec(name: &str, n: usize, lambda: f64) -> Result<MapSpec, Fail> {
    let lambda = if lambda.is_nan() { None } else { Some(lambda) };
    Ok(MapSpec::from_name(name, Some(n), lambda)?)
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread; do not free.
#[no_mangle]
pub extern "C" fn lq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static version string; do not free.
#[no_mangle]
pub extern "C" fn lq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn lq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Preparation from a JSON source: `{"positive_map_state": {...}}` or
/// `{"explicit": {...}}`, as in scenario files.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lq_preparation_from_json(
    json: *const c_char,
    out: *mut *mut LqPreparation,
) -> LqStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let src = scenario::parse_preparation_json(text.as_bytes())?;
        let prep = build_preparation(&src)?;
        write_out(out, Box::into_raw(Box::new(LqPreparation(prep))), "out")
    })
}

/// Preparation `C = (1 ⊗ √d) C_u (1 ⊗ √d)` from a named unital positive map
/// `u` on `M_n` and a state `d` (`2 * n * n` doubles). `lambda` is read only
/// by `depolarizing`; pass NaN otherwise.
///
/// # Safety
/// `name` must be NUL-terminated, `state` must hold `2 * n * n` doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lq_preparation_from_map(
    name: *const c_char,
    n: usize,
    lambda: f64,
    state: *const f64,
    out: *mut *mut LqPreparation,
) -> LqStatus {
    guard(|| {
        let spec = map_spec(str_arg(name, "name")?, n, lambda)?;
        let u = zoo(&spec)?;
        let d = hermitian_arg(state, spec.dim(), "state")?;
        let prep = ValidPreparation::from_positive_map(&u, &d)?.with_label(spec.label());
        write_out(out, Box::into_raw(Box::new(LqPreparation(prep))), "out")
    })
}

/// # Safety
/// `p` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn lq_preparation_dims(
    p: *const LqPreparation,
    dim_a: *mut usize,
    dim_b: *mut usize,
) -> LqStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("preparation"))?;
        write_out(dim_a, p.0.dim_a(), "dim_a")?;
        write_out(dim_b, p.0.dim_b(), "dim_b")
    })
}

/// `ω(Q, R)` for Hermitian `Q` (dim_a) and `R` (dim_b).
///
/// # Safety
/// `p` must be a live handle, `q` and `r` must hold `2 n^2` doubles for their
/// dimensions and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lq_preparation_eval(
    p: *const LqPreparation,
    q: *const f64,
    r: *const f64,
    out: *mut f64,
) -> LqStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("preparation"))?;
        let q = hermitian_arg(q, p.0.dim_a(), "q")?;
        let r = hermitian_arg(r, p.0.dim_b(), "r")?;
        write_out(out, p.0.eval(&q, &r)?, "out")
    })
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lq_preparation_free(p: *mut LqPreparation) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lq_model_build(
    p: *const LqPreparation,
    out: *mut *mut LqModel,
) -> LqStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("preparation"))?;
        let m = build_simulation(&p.0)?;
        write_out(out, Box::into_raw(Box::new(LqModel(m))), "out")
    })
}

/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lq_model_support_dim(m: *const LqModel, out: *mut usize) -> LqStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("model"))?;
        write_out(out, m.0.support_dim, "out")
    })
}

/// `<Ω| ν_A(Q) ν_B(R) |Ω>`.
///
/// # Safety
/// As for [`lq_preparation_eval`], with a model handle.
#[no_mangle]
pub unsafe extern "C" fn lq_model_simulate_value(
    m: *const LqModel,
    q: *const f64,
    r: *const f64,
    out: *mut f64,
) -> LqStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("model"))?;
        let q = hermitian_arg(q, m.0.dim_a, "q")?;
        let r = hermitian_arg(r, m.0.dim_b, "r")?;
        write_out(out, m.0.simulate_value(&q, &r)?, "out")
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lq_model_free(m: *mut LqModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Decomposability search on the Choi matrix of a named map. `max_iter == 0`
/// keeps the default cap.
///
/// # Safety
/// `name` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lq_decompose_map(
    name: *const c_char,
    n: usize,
    lambda: f64,
    max_iter: usize,
    seed: u64,
    out: *mut *mut LqOutcome,
) -> LqStatus {
    guard(|| {
        let spec = map_spec(str_arg(name, "name")?, n, lambda)?;
        let u = zoo(&spec)?;
        let mut opts = DecompOptions {
            seed,
            ..DecompOptions::default()
        };
        if max_iter > 0 {
            opts.max_iter = max_iter;
        }
        let o = decompose(u.choi(), (u.dim_in(), u.dim_out()), &opts)?;
        write_out(out, Box::into_raw(Box::new(LqOutcome(o))), "out")
    })
}

/// # Safety
/// `o` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lq_outcome_status(
    o: *const LqOutcome,
    out: *mut LqDecompStatus,
) -> LqStatus {
    guard(|| {
        let o = o.as_ref().ok_or_else(|| null("outcome"))?;
        let s = match o.0.status {
            DecompStatus::Feasible => LqDecompStatus::Feasible,
            DecompStatus::Infeasible => LqDecompStatus::Infeasible,
            DecompStatus::Undecided => LqDecompStatus::Undecided,
        };
        write_out(out, s, "out")
    })
}

/// Witness violation `-<W, C>`; zero unless infeasible.
///
/// # Safety
/// `o` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lq_outcome_violation(o: *const LqOutcome, out: *mut f64) -> LqStatus {
    guard(|| {
        let o = o.as_ref().ok_or_else(|| null("outcome"))?;
        write_out(out, o.0.violation, "out")
    })
}

/// # Safety
/// `o` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lq_outcome_iterations(o: *const LqOutcome, out: *mut usize) -> LqStatus {
    guard(|| {
        let o = o.as_ref().ok_or_else(|| null("outcome"))?;
        write_out(out, o.0.iterations, "out")
    })
}

/// Full outcome as JSON; release with [`lq_string_free`].
///
/// # Safety
/// `o` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lq_outcome_to_json(
    o: *const LqOutcome,
    out: *mut *mut c_char,
) -> LqStatus {
    guard(|| {
        let o = o.as_ref().ok_or_else(|| null("outcome"))?;
        let s =
            serde_json::to_string(&o.0).map_err(|e| Fail(LqStatus::Numerical, e.to_string()))?;
        write_out(out, into_c_string(s), "out")
    })
}

/// # Safety
/// `o` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lq_outcome_free(o: *mut LqOutcome) {
    if !o.is_null() {
        drop(Box::from_raw(o));
    }
}

/// Runs a scenario document (which must name its `kind`). `report` receives
/// the report, or an error document when execution fails; `exit_code`
/// receives 0, 1 or 2 as for the command-line tool. The return status only
/// reports problems with the arguments themselves.
///
/// # Safety
/// `json` must be NUL-terminated; `report` and `exit_code` writable.
#[no_mangle]
pub unsafe extern "C" fn lq_run_scenario_json(
    json: *const c_char,
    report: *mut *mut c_char,
    exit_code: *mut c_int,
) -> LqStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        if report.is_null() || exit_code.is_null() {
            return Err(null("report or exit_code"));
        }
        let (code, doc) = match scenario::run_text(text.as_bytes(), None, &Overrides::default()) {
            Ok(r) => (
                r.exit_code(),
                serde_json::to_string(&r).expect("report serializes"),
            ),
            Err((k, e)) => (EXIT_ERROR, error_document(k, &e).to_string()),
        };
        write_out(report, into_c_string(doc), "report")?;
        write_out(exit_code, code as c_int, "exit_code")
    })
}
