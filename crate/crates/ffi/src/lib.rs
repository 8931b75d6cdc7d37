//! C ABI over `phireg`.
//!
//! Every function returns a [`PhiregStatus`]. Objects are opaque handles
//! created by a `*_new`/`*_run` function and released by the matching
//! `*_free`. After a non-`Ok` status, `phireg_last_error` copies the message
//! for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use phireg::cli::{self, LearnerSpec, ScenarioConfig, ScenarioOutcome};
use phireg::conformal::ConformalState;
use phireg::geometry::ConvexSet;
use phireg::learners::{Feedback, Learner};
use phireg::Error;

/// Status codes. `InvalidInput` and `Numerical` match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiregStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numerical = 3,
    Utf8 = 4,
    OutOfRange = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn fail(status: PhiregStatus, msg: impl Into<String>) -> PhiregStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> PhiregStatus {
    let status = match e {
        Error::Numerical { .. } => PhiregStatus::Numerical,
        _ => PhiregStatus::InvalidInput,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> PhiregStatus) -> PhiregStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(PhiregStatus::Panic, msg)
        }
    }
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return from_error(e),
        }
    };
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, PhiregStatus> {
    if p.is_null() {
        return Err(fail(PhiregStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(PhiregStatus::Utf8, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], PhiregStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(PhiregStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

macro_rules! arg {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(PhiregStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

fn to_c_string(s: String, out: *mut *mut c_char) -> PhiregStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            PhiregStatus::Ok
        }
        Err(_) => fail(PhiregStatus::Utf8, "string holds an interior NUL"),
    }
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length plus one,
/// or 0 when there is no error.
#[no_mangle]
pub unsafe extern "C" fn phireg_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Releases a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn phireg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Online threshold learner for conformal prediction.
pub struct PhiregConformal(ConformalState);

#[no_mangle]
pub unsafe extern "C" fn phireg_conformal_new(
    theta1: f64,
    eta: f64,
    alpha: f64,
    out: *mut *mut PhiregConformal,
) -> PhiregStatus {
    guard(|| {
        non_null!(out);
        let st = try_ffi!(ConformalState::new(theta1, eta, alpha));
        *out = Box::into_raw(Box::new(PhiregConformal(st)));
        PhiregStatus::Ok
    })
}

/// Feeds one score; `covered` receives whether it fell at or below the
/// threshold in force.
#[no_mangle]
pub unsafe extern "C" fn phireg_conformal_update(
    h: *mut PhiregConformal,
    score: f64,
    covered: *mut bool,
) -> PhiregStatus {
    guard(|| {
        non_null!(h);
        if !score.is_finite() {
            return fail(PhiregStatus::InvalidInput, "score must be finite");
        }
        let c = (*h).0.update(score);
        if !covered.is_null() {
            *covered = c;
        }
        PhiregStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn phireg_conformal_theta(h: *const PhiregConformal, out: *mut f64) -> PhiregStatus {
    guard(|| {
        non_null!(h, out);
        *out = (*h).0.theta;
        PhiregStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn phireg_conformal_rounds(h: *const PhiregConformal, out: *mut usize) -> PhiregStatus {
    guard(|| {
        non_null!(h, out);
        *out = (*h).0.rounds;
        PhiregStatus::Ok
    })
}

/// Empirical miscoverage, `|miscoverage - α|`, and `|θ_end - θ_1|/(ηT)`.
/// Any output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn phireg_conformal_stats(
    h: *const PhiregConformal,
    miscoverage: *mut f64,
    gap: *mut f64,
    identity_gap: *mut f64,
) -> PhiregStatus {
    guard(|| {
        non_null!(h);
        let st = &(*h).0;
        let m = try_ffi!(st.miscoverage());
        let g = try_ffi!(st.coverage_gap());
        let i = try_ffi!(st.identity_gap());
        for (p, v) in [(miscoverage, m), (gap, g), (identity_gap, i)] {
            if !p.is_null() {
                *p = v;
            }
        }
        PhiregStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn phireg_conformal_free(h: *mut PhiregConformal) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// A gradient learner (GD, OG or MD) on a convex set.
pub struct PhiregLearner {
    inner: Box<dyn Learner>,
    dim: usize,
}

/// Builds a learner from JSON descriptions of the set and learner, e.g.
/// `{"kind":"ball","center":[0,0],"radius":1}` and
/// `{"learner":"gd","x1":[0,0],"schedule":{"schedule":"constant","eta":0.1}}`.
#[no_mangle]
pub unsafe extern "C" fn phireg_learner_new(
    set_json: *const c_char,
    learner_json: *const c_char,
    out: *mut *mut PhiregLearner,
) -> PhiregStatus {
    guard(|| {
        non_null!(out);
        let set_text = arg!(str_arg(set_json, "set_json"));
        let learner_text = arg!(str_arg(learner_json, "learner_json"));
        let set: ConvexSet = try_ffi!(serde_json::from_str(set_text).map_err(Error::from));
        try_ffi!(set.validate());
        let spec: LearnerSpec = try_ffi!(serde_json::from_str(learner_text).map_err(Error::from));
        let inner = try_ffi!(spec.build(&set));
        *out = Box::into_raw(Box::new(PhiregLearner { inner, dim: set.dim() }));
        PhiregStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn phireg_learner_dim(h: *const PhiregLearner, out: *mut usize) -> PhiregStatus {
    guard(|| {
        non_null!(h, out);
        *out = (*h).dim;
        PhiregStatus::Ok
    })
}

/// Writes the current play into `x`, which must hold `len == dim` values.
#[no_mangle]
pub unsafe extern "C" fn phireg_learner_next(h: *mut PhiregLearner, x: *mut f64, len: usize) -> PhiregStatus {
    guard(|| {
        non_null!(h, x);
        let l = &mut *h;
        if len != l.dim {
            return fail(PhiregStatus::OutOfRange, format!("buffer holds {len} values, dimension is {}", l.dim));
        }
        let play = try_ffi!(l.inner.next());
        ptr::copy_nonoverlapping(play.as_ptr(), x, len);
        PhiregStatus::Ok
    })
}

/// Reports the gradient of this round's loss at the play.
#[no_mangle]
pub unsafe extern "C" fn phireg_learner_observe(h: *mut PhiregLearner, grad: *const f64, len: usize) -> PhiregStatus {
    guard(|| {
        non_null!(h);
        let g = arg!(slice_arg(grad, len, "grad"));
        try_ffi!((*h).inner.observe(Feedback::LossGradient(g)));
        PhiregStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn phireg_learner_free(h: *mut PhiregLearner) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// The records and checks of one scenario run.
pub struct PhiregScenario {
    id: String,
    outcome: ScenarioOutcome,
}

/// Runs a scenario given as JSON text.
#[no_mangle]
pub unsafe extern "C" fn phireg_scenario_run(config_json: *const c_char, out: *mut *mut PhiregScenario) -> PhiregStatus {
    guard(|| {
        non_null!(out);
        let text = arg!(str_arg(config_json, "config_json"));
        let cfg = try_ffi!(ScenarioConfig::from_json(text));
        let outcome = try_ffi!(cli::run_scenario(&cfg));
        *out = Box::into_raw(Box::new(PhiregScenario { id: cfg.id, outcome }));
        PhiregStatus::Ok
    })
}

/// `passed` receives whether every check passed.
#[no_mangle]
pub unsafe extern "C" fn phireg_scenario_passed(h: *const PhiregScenario, passed: *mut bool) -> PhiregStatus {
    guard(|| {
        non_null!(h, passed);
        *passed = (*h).outcome.passed();
        PhiregStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn phireg_scenario_check_count(h: *const PhiregScenario, out: *mut usize) -> PhiregStatus {
    guard(|| {
        non_null!(h, out);
        *out = (*h).outcome.checks.len();
        PhiregStatus::Ok
    })
}

/// Check `i`: its result, and its name and detail as new strings the caller
/// frees with `phireg_string_free`. `name` and `detail` may be null.
#[no_mangle]
pub unsafe extern "C" fn phireg_scenario_check(
    h: *const PhiregScenario,
    i: usize,
    passed: *mut bool,
    name: *mut *mut c_char,
    detail: *mut *mut c_char,
) -> PhiregStatus {
    guard(|| {
        non_null!(h, passed);
        let s = &*h;
        let Some(c) = s.outcome.checks.get(i) else {
            return fail(PhiregStatus::OutOfRange, format!("{} has {} checks", s.id, s.outcome.checks.len()));
        };
        *passed = c.passed;
        if !name.is_null() {
            let st = to_c_string(c.name.clone(), name);
            if st != PhiregStatus::Ok {
                return st;
            }
        }
        if !detail.is_null() {
            return to_c_string(c.detail.clone(), detail);
        }
        PhiregStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn phireg_scenario_record_count(h: *const PhiregScenario, out: *mut usize) -> PhiregStatus {
    guard(|| {
        non_null!(h, out);
        *out = (*h).outcome.records.len();
        PhiregStatus::Ok
    })
}

/// Writes the run's CSV to `path`, creating parent directories.
#[no_mangle]
pub unsafe extern "C" fn phireg_scenario_write_csv(h: *const PhiregScenario, path: *const c_char) -> PhiregStatus {
    guard(|| {
        non_null!(h);
        let p = arg!(str_arg(path, "path"));
        try_ffi!(cli::emit_csv(&(*h).outcome.records, Path::new(p)));
        PhiregStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn phireg_scenario_free(h: *mut PhiregScenario) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Audits a JSON trajectory against a JSON deviation spec. `out` receives a
/// JSON array of `{name, total, exactness, witness}` to be released with
/// `phireg_string_free`.
#[no_mangle]
pub unsafe extern "C" fn phireg_audit(
    trajectory_json: *const c_char,
    spec_json: *const c_char,
    out: *mut *mut c_char,
) -> PhiregStatus {
    guard(|| {
        non_null!(out);
        let traj_text = arg!(str_arg(trajectory_json, "trajectory_json"));
        let spec_text = arg!(str_arg(spec_json, "spec_json"));
        if !spec_text.trim_start().starts_with('{') {
            return fail(PhiregStatus::InvalidInput, "spec_json must be a JSON object");
        }
        let traj = try_ffi!(cli::parse_trajectory(traj_text));
        let spec = try_ffi!(cli::parse_audit_spec(spec_text));
        let lines = try_ffi!(cli::audit(&traj, &spec));
        let json = try_ffi!(serde_json::to_string(&lines).map_err(Error::from));
        to_c_string(json, out)
    })
}
