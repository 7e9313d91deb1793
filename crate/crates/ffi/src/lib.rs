//! C ABI over the protection engine.
//!
//! Every fallible call returns an [`MdseStatus`]; on failure the message is
//! kept per thread and read back with [`mdse_last_error_message`]. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nalgebra::DVector;

use microgrid_dse::chi2;
use microgrid_dse::decision::DecisionKind;
use microgrid_dse::estimator::{wls_solve, SolverOptions};
use microgrid_dse::hypothesis::Verdict;
use microgrid_dse::measurement::{model_from_rows, MeasurementModel, RawRow};
use microgrid_dse::scenario::{self, RunOutput, ScenarioConfig};
use microgrid_dse::Error;

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed or inconsistent configuration.
    Config = 3,
    /// Network or measurement model rejected (unobservable, bad topology).
    Model = 4,
    /// Numerical failure (singular system, no redundancy).
    Numeric = 5,
    Io = 6,
    OutOfRange = 7,
    /// Internal panic caught at the boundary.
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdseVerdict {
    Normal = 0,
    CyberAttack = 1,
    Fault = 2,
    Combined = 3,
    Unresolved = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdseDecisionKind {
    Alert = 0,
    Trip = 1,
    Unresolved = 2,
}

/// One estimated window.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MdseWindow {
    pub time_s: f64,
    pub zeta: f64,
    pub nu: usize,
    pub confidence: f64,
    pub area: f64,
    pub verdict: MdseVerdict,
    pub alert: bool,
    pub trip: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MdseDecision {
    pub kind: MdseDecisionKind,
    pub verdict: MdseVerdict,
    pub time_s: f64,
    pub window: usize,
    pub cause_window: usize,
    /// Negative when no matching event is scheduled.
    pub latency_s: f64,
}

/// Result of a completed scenario run.
pub struct MdseRun {
    out: RunOutput,
    report_json: CString,
}

/// Linear WLS problem assembled from raw rows.
pub struct MdseEstimator {
    model: MeasurementModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> MdseStatus {
    match err {
        Error::Config(_) | Error::InvalidEvent(_) | Error::Dimension { .. } => MdseStatus::Config,
        Error::InvalidDevice(_)
        | Error::ModelInvariant(_)
        | Error::DanglingNode(_)
        | Error::DuplicateBinding(_)
        | Error::UnknownReference(_)
        | Error::Unobservable { .. } => MdseStatus::Model,
        Error::SingularCompanion { .. } | Error::NoRedundancy => MdseStatus::Numeric,
        Error::Io(_) | Error::Csv(_) => MdseStatus::Io,
    }
}

struct Fail(MdseStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MdseStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MdseStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            MdseStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(MdseStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(MdseStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn verdict(v: Verdict) -> MdseVerdict {
    match v {
        Verdict::Normal => MdseVerdict::Normal,
        Verdict::CyberAttack => MdseVerdict::CyberAttack,
        Verdict::Fault => MdseVerdict::Fault,
        Verdict::Combined => MdseVerdict::Combined,
        Verdict::Unresolved => MdseVerdict::Unresolved,
    }
}

fn run_into(cfg: ScenarioConfig, out: *mut *mut MdseRun) -> Result<(), Fail> {
    let result = scenario::run(&cfg)?;
    let json = serde_json::to_string(&result.report)
        .map_err(|e| Fail(MdseStatus::Io, format!("report serialization: {e}")))?;
    let handle = Box::new(MdseRun {
        out: result,
        report_json: CString::new(json).unwrap_or_default(),
    });
    unsafe { *out = Box::into_raw(handle) };
    Ok(())
}

/// Last error message of the calling thread; empty after a successful call.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mdse_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mdse_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Chi-square confidence `1 - F(zeta; nu)`.
///
/// # Safety
/// `out` must be a valid pointer to a writable double.
#[no_mangle]
pub unsafe extern "C" fn mdse_confidence(zeta: f64, nu: usize, out: *mut f64) -> MdseStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = chi2::confidence(zeta, nu)?;
        Ok(())
    })
}

/// Run a scenario given as a JSON config string.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdse_run_from_json(json: *const c_char, out: *mut *mut MdseRun) -> MdseStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = ScenarioConfig::from_json(str_arg(json, "json")?)?;
        run_into(cfg, out)
    })
}

/// Run a built-in case (`case1` .. `case4`), optionally cut to `duration_s`
/// seconds when it is positive.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdse_run_builtin(name: *const c_char, duration_s: f64, out: *mut *mut MdseRun) -> MdseStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let name = str_arg(name, "name")?;
        let mut cfg = scenario::case(name).ok_or_else(|| Fail(MdseStatus::Config, format!("unknown case `{name}`")))?;
        if duration_s > 0.0 {
            cfg.duration = duration_s;
            cfg.events.retain(|e| e.end() <= duration_s);
        }
        run_into(cfg, out)
    })
}

/// Release a run handle. Null is ignored.
///
/// # Safety
/// `run` must come from `mdse_run_*` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mdse_run_free(run: *mut MdseRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of estimated windows; 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mdse_run_window_count(run: *const MdseRun) -> usize {
    run.as_ref().map_or(0, |r| r.out.trace.len())
}

/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdse_run_window(run: *const MdseRun, index: usize, out: *mut MdseWindow) -> MdseStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let row = run.out.trace.get(index).ok_or_else(|| {
            Fail(
                MdseStatus::OutOfRange,
                format!("window {index} of {}", run.out.trace.len()),
            )
        })?;
        *out = MdseWindow {
            time_s: row.time_s,
            zeta: row.zeta,
            nu: row.nu,
            confidence: row.confidence,
            area: row.area,
            verdict: verdict(row.verdict),
            alert: row.alert,
            trip: row.trip,
        };
        Ok(())
    })
}

/// Number of emitted decisions; 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mdse_run_decision_count(run: *const MdseRun) -> usize {
    run.as_ref().map_or(0, |r| r.out.report.decisions.len())
}

/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdse_run_decision(run: *const MdseRun, index: usize, out: *mut MdseDecision) -> MdseStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let d = run.out.report.decisions.get(index).ok_or_else(|| {
            Fail(
                MdseStatus::OutOfRange,
                format!("decision {index} of {}", run.out.report.decisions.len()),
            )
        })?;
        *out = MdseDecision {
            kind: match d.kind {
                DecisionKind::Alert => MdseDecisionKind::Alert,
                DecisionKind::Trip => MdseDecisionKind::Trip,
                DecisionKind::Unresolved => MdseDecisionKind::Unresolved,
            },
            verdict: verdict(d.verdict),
            time_s: d.time_s,
            window: d.window,
            cause_window: d.cause_window,
            latency_s: d.latency_s.unwrap_or(-1.0),
        };
        Ok(())
    })
}

/// Run report as JSON, owned by the handle; null for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mdse_run_report_json(run: *const MdseRun) -> *const c_char {
    run.as_ref().map_or(ptr::null(), |r| r.report_json.as_ptr())
}

/// Write trace, decisions, report and config files into `dir`.
///
/// # Safety
/// `run` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mdse_run_write_outputs(run: *const MdseRun, dir: *const c_char) -> MdseStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        scenario::write_outputs(&run.out, Path::new(str_arg(dir, "dir")?), false)?;
        Ok(())
    })
}

/// Build a linear estimator `z = H x + e` from a row-major `rows x states`
/// matrix and per-row standard deviations.
///
/// # Safety
/// `h` must hold `rows * states` doubles, `sigma` `rows` doubles, and `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdse_estimator_new(
    states: usize,
    rows: usize,
    h: *const f64,
    sigma: *const f64,
    out: *mut *mut MdseEstimator,
) -> MdseStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if states == 0 || rows == 0 {
            return Err(Fail(MdseStatus::Config, "states and rows must be positive".into()));
        }
        let len = rows
            .checked_mul(states)
            .ok_or_else(|| Fail(MdseStatus::OutOfRange, "matrix size overflows".into()))?;
        let h = slice_arg(h, len, "h")?;
        let sigma = slice_arg(sigma, rows, "sigma")?;
        let raw = (0..rows)
            .map(|i| RawRow::linear(format!("row{i}"), sigma[i], h[i * states..(i + 1) * states].to_vec()))
            .collect();
        let model = model_from_rows(states, raw)?;
        *out = Box::into_raw(Box::new(MdseEstimator { model }));
        Ok(())
    })
}

/// Degrees of freedom `rows - states`; 0 for a null handle.
///
/// # Safety
/// `est` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mdse_estimator_dof(est: *const MdseEstimator) -> usize {
    est.as_ref().map_or(0, |e| e.model.nu())
}

/// Solve for `x` given `z`. `x_out` receives `states` doubles; `zeta_out` and
/// `confidence_out` may be null.
///
/// # Safety
/// `z` must hold `rows` doubles and `x_out` `states` doubles.
#[no_mangle]
pub unsafe extern "C" fn mdse_estimator_solve(
    est: *const MdseEstimator,
    z: *const f64,
    x_out: *mut f64,
    zeta_out: *mut f64,
    confidence_out: *mut f64,
) -> MdseStatus {
    guard(|| {
        let est = est.as_ref().ok_or_else(|| null("estimator"))?;
        let m = &est.model;
        let z = DVector::from_column_slice(slice_arg(z, m.m(), "z")?);
        if x_out.is_null() {
            return Err(null("x_out"));
        }
        let n = m.window_state_count();
        let res = wls_solve(m, &z, &DVector::zeros(n), SolverOptions::default())?;
        std::slice::from_raw_parts_mut(x_out, n).copy_from_slice(res.x.as_slice());
        if !zeta_out.is_null() {
            *zeta_out = res.zeta;
        }
        if !confidence_out.is_null() {
            *confidence_out = res.confidence;
        }
        Ok(())
    })
}

/// Release an estimator. Null is ignored.
///
/// # Safety
/// `est` must come from `mdse_estimator_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mdse_estimator_free(est: *mut MdseEstimator) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}
