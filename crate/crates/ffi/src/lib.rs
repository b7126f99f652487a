//! C ABI over the `qgevrey` toolkit.
//!
//! Every function returns a [`QgStatus`] code and writes results through out
//! pointers. On failure the message is kept per thread and can be read with
//! [`qg_last_error_message`]. Handles are opaque and must be released with
//! their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;
use qgevrey::model::{assemble_solution, OverlapKind, Scenario};
use qgevrey::qlaplace::monomial_constant;
use qgevrey::special::{inverse_fourier, theta_qdiff_residual, BuiltinSymbol, HorizontalStrip, ThetaSpec};
use qgevrey::Error;

/// Status codes returned by every entry point.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutsideDomain = 3,
    CertificationFailed = 4,
    Numerical = 5,
    Parse = 6,
    Panic = 7,
}

/// A complex number as two doubles.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QgComplex {
    pub re: f64,
    pub im: f64,
}

impl From<QgComplex> for Complex64 {
    fn from(c: QgComplex) -> Self {
        Complex64::new(c.re, c.im)
    }
}

impl From<Complex64> for QgComplex {
    fn from(c: Complex64) -> Self {
        QgComplex { re: c.re, im: c.im }
    }
}

/// Opaque theta function handle.
pub struct QgTheta(ThetaSpec);

/// Opaque scenario handle.
pub struct QgScenario(Scenario);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QgStatus {
    match e {
        Error::InvalidFrame(_) | Error::InvalidArgument(_) | Error::Degenerate(_) | Error::RowRejected { .. } => {
            QgStatus::InvalidArgument
        }
        Error::EssentialSingularity
        | Error::TruncationDomain { .. }
        | Error::SpiralProximity { .. }
        | Error::OutsideStrip { .. }
        | Error::OutsideDomain(_) => QgStatus::OutsideDomain,
        Error::Json(_) | Error::Csv(_) | Error::Io(_) => QgStatus::Parse,
        e if e.is_certification_failure() => QgStatus::CertificationFailed,
        _ => QgStatus::Numerical,
    }
}

/// Runs `f`, recording the error message and mapping panics.
fn guard(f: impl FnOnce() -> Result<(), (QgStatus, String)>) -> QgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QgStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            QgStatus::Panic
        }
    }
}

fn lift<T>(r: qgevrey::Result<T>) -> Result<T, (QgStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), (QgStatus, String)> {
    if p.is_null() {
        Err((QgStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// Pointer to the last error message of this thread, or null. The string
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Creates a theta handle for `(q, k)` with its growth constant calibrated.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn qg_theta_new(q: f64, k: f64, out: *mut *mut QgTheta) -> QgStatus {
    guard(|| {
        non_null(out, "out")?;
        let spec = lift(ThetaSpec::new(q, k, 1e-16).and_then(|s| s.calibrated()))?;
        *out = Box::into_raw(Box::new(QgTheta(spec)));
        Ok(())
    })
}

/// Releases a theta handle. Null is accepted.
///
/// # Safety
/// `h` must come from [`qg_theta_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qg_theta_free(h: *mut QgTheta) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Evaluates theta at `z`.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qg_theta_eval(h: *const QgTheta, z: QgComplex, out: *mut QgComplex) -> QgStatus {
    guard(|| {
        non_null(h, "handle")?;
        non_null(out, "out")?;
        *out = lift((*h).0.eval(z.into()))?.into();
        Ok(())
    })
}

/// Relative residual of the q-difference equation after `m` shifts.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qg_theta_qdiff_residual(h: *const QgTheta, z: QgComplex, m: i32, out: *mut f64) -> QgStatus {
    guard(|| {
        non_null(h, "handle")?;
        non_null(out, "out")?;
        *out = lift(theta_qdiff_residual(&(*h).0, z.into(), m))?.value;
        Ok(())
    })
}

/// Creates the built-in two-level scenario.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qg_scenario_default(out: *mut *mut QgScenario) -> QgStatus {
    guard(|| {
        non_null(out, "out")?;
        let sc = lift(Scenario::default_scenario())?;
        *out = Box::into_raw(Box::new(QgScenario(sc)));
        Ok(())
    })
}

/// Parses and validates a scenario from a NUL-terminated JSON string.
///
/// # Safety
/// `json` must be a valid C string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qg_scenario_from_json(json: *const c_char, out: *mut *mut QgScenario) -> QgStatus {
    guard(|| {
        non_null(json, "json")?;
        non_null(out, "out")?;
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (QgStatus::Parse, format!("scenario is not UTF-8: {e}")))?;
        let sc: Scenario = lift(serde_json::from_str(text).map_err(Error::from))?;
        lift(sc.validate())?;
        *out = Box::into_raw(Box::new(QgScenario(sc)));
        Ok(())
    })
}

/// Releases a scenario handle. Null is accepted.
///
/// # Safety
/// `h` must come from a scenario constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qg_scenario_free(h: *mut QgScenario) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of directions (and overlaps) in the scenario.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qg_scenario_len(h: *const QgScenario, out: *mut usize) -> QgStatus {
    guard(|| {
        non_null(h, "handle")?;
        non_null(out, "out")?;
        *out = (*h).0.len();
        Ok(())
    })
}

/// Writes 1 if overlap `p` is of intersecting type and 0 if disjoint.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qg_scenario_overlap_intersecting(h: *const QgScenario, p: usize, out: *mut i32) -> QgStatus {
    guard(|| {
        non_null(h, "handle")?;
        non_null(out, "out")?;
        *out = i32::from(lift((*h).0.overlap_kind(p))? == OverlapKind::Intersecting);
        Ok(())
    })
}

/// Sectorial solution `u_p(t, z, eps)` with its quadrature error estimate.
///
/// # Safety
/// `h` must be a live handle; `out` and `err` writable (`err` may be null).
#[no_mangle]
pub unsafe extern "C" fn qg_scenario_solution(
    h: *const QgScenario,
    p: usize,
    t: QgComplex,
    z: QgComplex,
    eps: QgComplex,
    out: *mut QgComplex,
    err: *mut f64,
) -> QgStatus {
    guard(|| {
        non_null(h, "handle")?;
        non_null(out, "out")?;
        let sc = &(*h).0;
        if p >= sc.len() {
            return Err((QgStatus::InvalidArgument, format!("direction {p} out of range")));
        }
        let v = lift(assemble_solution(sc, p, t.into(), z.into(), eps.into()))?;
        *out = v.value.into();
        if !err.is_null() {
            *err = v.error;
        }
        Ok(())
    })
}

/// Constant `c` with `L(u^n)(T) = c T^n` for the transform of order `k`
/// along direction `d`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qg_qlaplace_monomial_constant(q: f64, k: f64, d: f64, n: u32, out: *mut QgComplex) -> QgStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = lift(monomial_constant(q, k, d, n, 1e-13))?.into();
        Ok(())
    })
}

/// Inverse Fourier transform of a built-in symbol (`"expdecay"`, `"odd"` or
/// `"gaussian"`) at `z` in the strip `|Im z| < beta_prime`.
///
/// # Safety
/// `symbol` must be a valid C string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qg_inverse_fourier(
    symbol: *const c_char,
    beta_prime: f64,
    z: QgComplex,
    out: *mut QgComplex,
) -> QgStatus {
    guard(|| {
        non_null(symbol, "symbol")?;
        non_null(out, "out")?;
        let name = CStr::from_ptr(symbol)
            .to_str()
            .map_err(|e| (QgStatus::Parse, format!("symbol is not UTF-8: {e}")))?;
        let sym = lift(BuiltinSymbol::by_name(name))?;
        let strip = lift(HorizontalStrip::new(beta_prime, 1.0))?;
        *out = lift(inverse_fourier(&sym, z.into(), &strip, 1e-12))?.value.into();
        Ok(())
    })
}
