//! C interface to the workbench.
//!
//! Every function returns a [`CovdilStatus`]. Strings handed out by the
//! library are NUL-terminated UTF-8 and must be released with
//! [`covdil_string_free`]; scenarios with [`covdil_scenario_free`]. After a
//! non-zero status, [`covdil_last_error`] describes what went wrong on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use covariant_dilation::dilation::schaffer_dilate;
use covariant_dilation::fixtures::matrix_pair;
use covariant_dilation::numerics::{c, CMat};
use covariant_dilation::workbench::{self, Command, Report, Scenario};
use covariant_dilation::{Error, Tolerance};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovdilStatus {
    Ok = 0,
    /// The report was produced but at least one clause failed.
    ClauseFailed = 1,
    /// Malformed or rejected input.
    Invalid = 2,
    Internal = 3,
    NullPointer = 4,
    InvalidUtf8 = 5,
    /// The caller's output buffer is too small; the needed size is still written.
    BufferTooSmall = 6,
}

/// A validated scenario.
pub struct CovdilScenario {
    inner: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(CovdilStatus);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = if e.is_validation() || matches!(e, Error::NotContraction { .. } | Error::DimensionMismatch(_)) {
            CovdilStatus::Invalid
        } else {
            CovdilStatus::Internal
        };
        set_error(e.to_string());
        Fail(status)
    }
}

fn fail<T>(status: CovdilStatus, msg: impl Into<String>) -> Result<T, Fail> {
    set_error(msg);
    Err(Fail(status))
}

fn guard(f: impl FnOnce() -> Result<CovdilStatus, Fail>) -> CovdilStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(Fail(s))) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            CovdilStatus::Internal
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return fail(CovdilStatus::NullPointer, format!("{what} is null"));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(s),
        Err(e) => fail(CovdilStatus::InvalidUtf8, format!("{what}: {e}")),
    }
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return fail(CovdilStatus::NullPointer, "output pointer is null");
    }
    out.write(value);
    Ok(())
}

unsafe fn scenario_ref<'a>(p: *const CovdilScenario) -> Result<&'a Scenario, Fail> {
    match p.as_ref() {
        Some(s) => Ok(&s.inner),
        None => fail(CovdilStatus::NullPointer, "scenario is null"),
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("report contains no NUL").into_raw()
}

unsafe fn emit_report(report: Report, out: *mut *mut c_char) -> Result<CovdilStatus, Fail> {
    if out.is_null() {
        return fail(CovdilStatus::NullPointer, "output pointer is null");
    }
    let status = if report.passed {
        CovdilStatus::Ok
    } else {
        let names: Vec<_> = report.failed().map(|c| c.name.clone()).collect();
        set_error(format!("failed clauses: {}", names.join("; ")));
        CovdilStatus::ClauseFailed
    };
    out.write(into_c_string(report.to_json()));
    Ok(status)
}

fn new_handle(sc: Scenario) -> *mut CovdilScenario {
    Box::into_raw(Box::new(CovdilScenario { inner: sc }))
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn covdil_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failure on this thread, or null. Valid until the next
/// call into the library from the same thread; do not free.
#[no_mangle]
pub extern "C" fn covdil_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parse and validate a scenario from JSON text.
///
/// # Safety
/// `json` must be null or a NUL-terminated string; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn covdil_scenario_from_json(json: *const c_char, out: *mut *mut CovdilScenario) -> CovdilStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        let sc = Scenario::from_json(text)?;
        write_out(out, new_handle(sc))?;
        Ok(CovdilStatus::Ok)
    })
}

/// Load and validate a scenario file.
///
/// # Safety
/// As for [`covdil_scenario_from_json`].
#[no_mangle]
pub unsafe extern "C" fn covdil_scenario_from_path(path: *const c_char, out: *mut *mut CovdilScenario) -> CovdilStatus {
    guard(|| {
        let p = read_str(path, "path")?;
        let sc = Scenario::load(Path::new(p))?;
        write_out(out, new_handle(sc))?;
        Ok(CovdilStatus::Ok)
    })
}

/// One of the built-in scenarios: "scalar", "automorphism" or "tower".
///
/// # Safety
/// As for [`covdil_scenario_from_json`].
#[no_mangle]
pub unsafe extern "C" fn covdil_demo_scenario(name: *const c_char, out: *mut *mut CovdilScenario) -> CovdilStatus {
    guard(|| {
        let name = read_str(name, "name")?;
        let sc = Scenario::from_raw(workbench::demo_scenario(name)?)?;
        write_out(out, new_handle(sc))?;
        Ok(CovdilStatus::Ok)
    })
}

/// # Safety
/// `scenario` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn covdil_scenario_free(scenario: *mut CovdilScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Run `command` ("check", "extend", "dilate", "unitary" or "matricial") and
/// write the JSON report to `*report`. The report is produced for both
/// `Ok` and `ClauseFailed`.
///
/// # Safety
/// `scenario` must be a live handle, `command` a NUL-terminated string and
/// `report` writable.
#[no_mangle]
pub unsafe extern "C" fn covdil_run(
    scenario: *const CovdilScenario,
    command: *const c_char,
    report: *mut *mut c_char,
) -> CovdilStatus {
    guard(|| {
        let sc = scenario_ref(scenario)?;
        let name = read_str(command, "command")?;
        let cmd: Command = match name.parse() {
            Ok(c) => c,
            Err(e) => return fail(CovdilStatus::Invalid, format!("{e}")),
        };
        if cmd == Command::Compare {
            return fail(CovdilStatus::Invalid, "use covdil_compare for compare");
        }
        emit_report(workbench::run(sc, cmd)?, report)
    })
}

/// Compare the extensions of two scenarios.
///
/// # Safety
/// As for [`covdil_run`].
#[no_mangle]
pub unsafe extern "C" fn covdil_compare(
    a: *const CovdilScenario,
    b: *const CovdilScenario,
    report: *mut *mut c_char,
) -> CovdilStatus {
    guard(|| {
        let (a, b) = (scenario_ref(a)?, scenario_ref(b)?);
        emit_report(workbench::compare(a, b)?, report)
    })
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn covdil_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Schäffer isometric dilation of an `n × n` complex contraction with `copies`
/// defect copies. Matrices are row-major with interleaved real and imaginary
/// parts, so `t` holds `2 n²` doubles. The dilation dimension is written to
/// `*dim` and the matrix to `out`, which must hold `2 dim²` doubles
/// (`capacity` counts doubles). Pass a null `out` to query the dimension.
///
/// # Safety
/// `t` must point to `2 n²` readable doubles, `dim` must be writable, and
/// `out` must be null or point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn covdil_schaffer_dilation(
    t: *const f64,
    n: usize,
    copies: usize,
    out: *mut f64,
    capacity: usize,
    dim: *mut usize,
) -> CovdilStatus {
    guard(|| {
        if t.is_null() || dim.is_null() {
            return fail(CovdilStatus::NullPointer, "matrix or dimension pointer is null");
        }
        if n == 0 || copies == 0 {
            return fail(CovdilStatus::Invalid, "n and copies must be positive");
        }
        let raw = std::slice::from_raw_parts(t, 2 * n * n);
        if raw.iter().any(|x| !x.is_finite()) {
            return fail(CovdilStatus::Invalid, "non-finite entry in T");
        }
        let m = CMat::from_fn(n, n, |i, j| c(raw[2 * (i * n + j)], raw[2 * (i * n + j) + 1]));
        let tol = Tolerance::default();
        let rec = schaffer_dilate(&matrix_pair(m, &tol)?, copies, &tol)?;
        let w = &rec.op;
        let d = w.nrows();
        dim.write(d);
        if out.is_null() {
            return Ok(CovdilStatus::Ok);
        }
        if capacity < 2 * d * d {
            return fail(
                CovdilStatus::BufferTooSmall,
                format!("output needs {} doubles, got {capacity}", 2 * d * d),
            );
        }
        let dst = std::slice::from_raw_parts_mut(out, 2 * d * d);
        for i in 0..d {
            for j in 0..d {
                let z = w[(i, j)];
                dst[2 * (i * d + j)] = z.re;
                dst[2 * (i * d + j) + 1] = z.im;
            }
        }
        Ok(CovdilStatus::Ok)
    })
}
