//! C ABI for the kinreg numerical laboratory.
//!
//! The surface is deliberately small: coefficient-model handles, the kinetic
//! symbol, degenerate-set measurement and the fitted non-degeneracy exponent,
//! the closed-form regularity exponents, and the one-dimensional block-norm
//! slope estimator. Everything heavier (solver runs, kinetic averaging,
//! space–time ensembles) stays behind the `kinreg` command line tool, whose
//! CSV outputs are the stable interchange format.
//!
//! Conventions, which the generated header (`include/kinreg.h`) restates:
//!
//! * Handles are opaque. Create them with the constructors below, release
//!   them with the matching `*_free`. Freeing a null handle is a no-op;
//!   passing null anywhere else fails with `KINREG_STATUS_INVALID_ARGUMENT`.
//! * Every fallible entry point returns a [`KinregStatus`]. Out-parameters
//!   are written only when the call returns `KINREG_STATUS_OK`.
//! * On failure a thread-local message is recorded; fetch it with
//!   [`kinreg_last_error`]. The message persists until the next failure on
//!   the same thread.
//! * Panics never unwind across the boundary: they are caught and surfaced
//!   as `KINREG_STATUS_RUNTIME_FAILURE`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::slice;

use kinreg::coeffs::{CoefficientModel, Interval};
use kinreg::lpdecomp::DyadicPartition;
use kinreg::nondeg::{self, AlphaOptions, DegeneracyFit, SymbolVariant};
use kinreg::regularity;
use kinreg::{Error, Field};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KinregStatus {
    /// Success; out-parameters are valid.
    Ok = 0,
    /// A precondition on the arguments failed (null pointer, bad range, …).
    InvalidArgument = 1,
    /// The computation itself failed (numerical trouble, I/O, panic).
    RuntimeFailure = 2,
    /// A caller-provided buffer is too short; nothing was written.
    BufferTooSmall = 3,
}

/// Outcome classification of a non-degeneracy fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KinregFitFlag {
    /// A trustworthy exponent was fitted.
    Ok = 0,
    /// Every measured set had measure zero: uniformly non-degenerate.
    Degenerate = 1,
    /// Fewer than four thresholds produced positive measure; no fit.
    TooFewPoints = 2,
    /// A fit exists but its r² is below 0.9; treat the exponent with care.
    LowR2 = 3,
}

/// Opaque coefficient model: flux, diffusion, square-root factor and their
/// primitives on a bounded state interval.
pub struct KinregModel(CoefficientModel);

/// Opaque result of [`kinreg_estimate_alpha`]: the fitted exponent plus the
/// measured `(δ, sup-measure)` curve behind it.
pub struct KinregFit(DegeneracyFit);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let owned = CString::new(message.replace('\0', "?"))
        .unwrap_or_else(|_| CString::new("error message unavailable").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(owned));
}

fn invalid(message: &str) -> KinregStatus {
    set_last_error(message);
    KinregStatus::InvalidArgument
}

fn report(err: &Error) -> KinregStatus {
    set_last_error(&err.to_string());
    match err.exit_code() {
        1 => KinregStatus::InvalidArgument,
        _ => KinregStatus::RuntimeFailure,
    }
}

/// Run `body`, converting any panic into a recorded runtime failure instead
/// of letting it unwind across the C boundary.
fn guard(body: impl FnOnce() -> KinregStatus) -> KinregStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let detail = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(&format!("internal panic: {detail}"));
            KinregStatus::RuntimeFailure
        }
    }
}

unsafe fn model_ref<'a>(handle: *const KinregModel) -> Option<&'a CoefficientModel> {
    handle.as_ref().map(|m| &m.0)
}

unsafe fn emit_model(out: *mut *mut KinregModel, model: CoefficientModel) -> KinregStatus {
    *out = Box::into_raw(Box::new(KinregModel(model)));
    KinregStatus::Ok
}

/// Crate version as a static NUL-terminated string; never freed.
#[no_mangle]
pub extern "C" fn kinreg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the thread's most recent error message into `buf` (NUL-terminated).
///
/// Returns the full message length **including** the terminator, or 0 when no
/// error has been recorded on this thread. When the return value exceeds
/// `cap` nothing was written; call again with a larger buffer. `buf` may be
/// null to query the required size.
#[no_mangle]
pub unsafe extern "C" fn kinreg_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let borrow = slot.borrow();
        let Some(message) = borrow.as_ref() else {
            return 0;
        };
        let bytes = message.as_bytes_with_nul();
        if !buf.is_null() && cap >= bytes.len() {
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, bytes.len());
        }
        bytes.len()
    })
}

/// Power-law benchmark model: flux `(λ^l, 0)`, diffusion `diag(0, |λ|^n)`
/// on two space dimensions.
#[no_mangle]
pub unsafe extern "C" fn kinreg_model_power_law(
    l: u32,
    n: u32,
    out: *mut *mut KinregModel,
) -> KinregStatus {
    guard(|| {
        if out.is_null() {
            return invalid("out pointer is null");
        }
        match CoefficientModel::power_law(l, n) {
            Ok(model) => emit_model(out, model),
            Err(err) => report(&err),
        }
    })
}

/// Inviscid Burgers model in one space dimension (no diffusion).
#[no_mangle]
pub unsafe extern "C" fn kinreg_model_burgers(out: *mut *mut KinregModel) -> KinregStatus {
    guard(|| {
        if out.is_null() {
            return invalid("out pointer is null");
        }
        emit_model(out, CoefficientModel::burgers())
    })
}

/// Pure heat model: no flux, isotropic diffusion `c·I` in `d` dimensions.
#[no_mangle]
pub unsafe extern "C" fn kinreg_model_heat(
    c: f64,
    d: usize,
    out: *mut *mut KinregModel,
) -> KinregStatus {
    guard(|| {
        if out.is_null() {
            return invalid("out pointer is null");
        }
        match CoefficientModel::heat(c, d) {
            Ok(model) => emit_model(out, model),
            Err(err) => report(&err),
        }
    })
}

/// Load a tabulated model from a CSV coefficient table. `path` must be
/// NUL-terminated UTF-8.
#[no_mangle]
pub unsafe extern "C" fn kinreg_model_from_csv(
    path: *const c_char,
    out: *mut *mut KinregModel,
) -> KinregStatus {
    guard(|| {
        if out.is_null() {
            return invalid("out pointer is null");
        }
        if path.is_null() {
            return invalid("path pointer is null");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return invalid("path is not valid UTF-8");
        };
        match CoefficientModel::from_csv(Path::new(path)) {
            Ok(model) => emit_model(out, model),
            Err(err) => report(&err),
        }
    })
}

/// Replace the model's state interval with `[lo, hi]`.
#[no_mangle]
pub unsafe extern "C" fn kinreg_model_set_interval(
    model: *mut KinregModel,
    lo: f64,
    hi: f64,
) -> KinregStatus {
    guard(|| {
        let Some(handle) = model.as_mut() else {
            return invalid("model handle is null");
        };
        match Interval::new(lo, hi) {
            Ok(interval) => {
                handle.0 = handle.0.clone().with_interval(interval);
                KinregStatus::Ok
            }
            Err(err) => report(&err),
        }
    })
}

/// Number of space dimensions the model is defined on.
#[no_mangle]
pub unsafe extern "C" fn kinreg_model_dimension(
    model: *const KinregModel,
    out: *mut usize,
) -> KinregStatus {
    let Some(m) = model_ref(model) else {
        return invalid("model handle is null");
    };
    if out.is_null() {
        return invalid("out pointer is null");
    }
    *out = m.dimension();
    KinregStatus::Ok
}

/// Release a model handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn kinreg_model_free(model: *mut KinregModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Kinetic symbol `|ξ0 + ⟨f(λ)|ξ̃⟩|² + ⟨a(λ)ξ̃|ξ̃⟩` at state `lambda`.
///
/// `xi` must hold `d + 1` entries forming a unit vector (time component
/// first); `lambda` must lie in the model's state interval.
#[no_mangle]
pub unsafe extern "C" fn kinreg_eval_symbol(
    model: *const KinregModel,
    xi: *const f64,
    xi_len: usize,
    lambda: f64,
    out: *mut f64,
) -> KinregStatus {
    guard(|| {
        let Some(m) = model_ref(model) else {
            return invalid("model handle is null");
        };
        if xi.is_null() {
            return invalid("xi pointer is null");
        }
        if out.is_null() {
            return invalid("out pointer is null");
        }
        let xi = slice::from_raw_parts(xi, xi_len);
        match m.eval_symbol(xi, lambda) {
            Ok(value) => {
                *out = value;
                KinregStatus::Ok
            }
            Err(err) => report(&err),
        }
    })
}

/// Lebesgue measure of `{λ in the state interval : symbol(ξ, λ) ≤ delta}`,
/// computed by midpoint counting on `lambda_grid` cells.
#[no_mangle]
pub unsafe extern "C" fn kinreg_degenerate_measure(
    model: *const KinregModel,
    xi: *const f64,
    xi_len: usize,
    delta: f64,
    lambda_grid: usize,
    out: *mut f64,
) -> KinregStatus {
    guard(|| {
        let Some(m) = model_ref(model) else {
            return invalid("model handle is null");
        };
        if xi.is_null() {
            return invalid("xi pointer is null");
        }
        if out.is_null() {
            return invalid("out pointer is null");
        }
        let xi = slice::from_raw_parts(xi, xi_len);
        match nondeg::measure_degenerate_set(m, xi, delta, lambda_grid) {
            Ok(value) => {
                *out = value;
                KinregStatus::Ok
            }
            Err(err) => report(&err),
        }
    })
}

/// Closed-form regularity exponents for non-degeneracy exponent `alpha` in
/// `d` space dimensions.
///
/// Writes the integrability exponent `q*`, the smoothness exponent `s*`, and
/// the effective smoothness target (`2·s*` when `deterministic` is true,
/// `s*` otherwise). Any out-pointer may be null to skip that value.
#[no_mangle]
pub unsafe extern "C" fn kinreg_exponents(
    alpha: f64,
    d: usize,
    deterministic: bool,
    out_q_star: *mut f64,
    out_s_star: *mut f64,
    out_effective_s: *mut f64,
) -> KinregStatus {
    match nondeg::exponents(alpha, d, deterministic) {
        Ok(pair) => {
            if !out_q_star.is_null() {
                *out_q_star = pair.q_star;
            }
            if !out_s_star.is_null() {
                *out_s_star = pair.s_star;
            }
            if !out_effective_s.is_null() {
                *out_effective_s = pair.effective_s();
            }
            KinregStatus::Ok
        }
        Err(err) => report(&err),
    }
}

/// Fit the non-degeneracy exponent α from sup-measure decay over a geometric
/// δ-grid, maximizing over `sphere_samples` unit frequencies per δ.
///
/// `mixed_variant` selects the un-squared hyperbolic smallness condition;
/// pass false for the symbol as stated. The returned handle must be released
/// with [`kinreg_fit_free`].
#[no_mangle]
pub unsafe extern "C" fn kinreg_estimate_alpha(
    model: *const KinregModel,
    sphere_samples: usize,
    delta_min: f64,
    delta_max: f64,
    delta_points: usize,
    lambda_grid: usize,
    seed: u64,
    mixed_variant: bool,
    out: *mut *mut KinregFit,
) -> KinregStatus {
    guard(|| {
        let Some(m) = model_ref(model) else {
            return invalid("model handle is null");
        };
        if out.is_null() {
            return invalid("out pointer is null");
        }
        let opts = AlphaOptions {
            sphere_samples,
            delta_min,
            delta_max,
            delta_points,
            lambda_grid,
            seed,
            variant: if mixed_variant {
                SymbolVariant::Mixed
            } else {
                SymbolVariant::Squared
            },
        };
        match nondeg::estimate_alpha(m, &opts) {
            Ok(fit) => {
                *out = Box::into_raw(Box::new(KinregFit(fit)));
                KinregStatus::Ok
            }
            Err(err) => report(&err),
        }
    })
}

/// Fitted exponent α; NaN when the fit refused (see [`kinreg_fit_flag`]).
#[no_mangle]
pub unsafe extern "C" fn kinreg_fit_alpha(fit: *const KinregFit, out: *mut f64) -> KinregStatus {
    let Some(f) = fit.as_ref() else {
        return invalid("fit handle is null");
    };
    if out.is_null() {
        return invalid("out pointer is null");
    }
    *out = f.0.alpha.unwrap_or(f64::NAN);
    KinregStatus::Ok
}

/// Coefficient of determination of the log–log fit (0 when no fit was made).
#[no_mangle]
pub unsafe extern "C" fn kinreg_fit_r_squared(
    fit: *const KinregFit,
    out: *mut f64,
) -> KinregStatus {
    let Some(f) = fit.as_ref() else {
        return invalid("fit handle is null");
    };
    if out.is_null() {
        return invalid("out pointer is null");
    }
    *out = f.0.r_squared;
    KinregStatus::Ok
}

/// Classification of the fit outcome.
#[no_mangle]
pub unsafe extern "C" fn kinreg_fit_flag(
    fit: *const KinregFit,
    out: *mut KinregFitFlag,
) -> KinregStatus {
    let Some(f) = fit.as_ref() else {
        return invalid("fit handle is null");
    };
    if out.is_null() {
        return invalid("out pointer is null");
    }
    *out = if f.0.degenerate_flag {
        KinregFitFlag::Degenerate
    } else if f.0.alpha.is_none() {
        KinregFitFlag::TooFewPoints
    } else if f.0.low_fit_quality {
        KinregFitFlag::LowR2
    } else {
        KinregFitFlag::Ok
    };
    KinregStatus::Ok
}

/// Number of `(δ, sup-measure)` points behind the fit.
#[no_mangle]
pub unsafe extern "C" fn kinreg_fit_point_count(
    fit: *const KinregFit,
    out: *mut usize,
) -> KinregStatus {
    let Some(f) = fit.as_ref() else {
        return invalid("fit handle is null");
    };
    if out.is_null() {
        return invalid("out pointer is null");
    }
    *out = f.0.delta_grid.len();
    KinregStatus::Ok
}

unsafe fn copy_curve(values: &[f64], buf: *mut f64, cap: usize) -> KinregStatus {
    if buf.is_null() {
        return invalid("buffer pointer is null");
    }
    if cap < values.len() {
        set_last_error(&format!(
            "buffer holds {cap} values but the curve has {}",
            values.len()
        ));
        return KinregStatus::BufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    KinregStatus::Ok
}

/// Copy the δ-grid into `buf`; `cap` must be at least the point count.
#[no_mangle]
pub unsafe extern "C" fn kinreg_fit_deltas(
    fit: *const KinregFit,
    buf: *mut f64,
    cap: usize,
) -> KinregStatus {
    let Some(f) = fit.as_ref() else {
        return invalid("fit handle is null");
    };
    copy_curve(&f.0.delta_grid, buf, cap)
}

/// Copy the per-δ sup-measures into `buf`; `cap` must be at least the point
/// count.
#[no_mangle]
pub unsafe extern "C" fn kinreg_fit_sup_measures(
    fit: *const KinregFit,
    buf: *mut f64,
    cap: usize,
) -> KinregStatus {
    let Some(f) = fit.as_ref() else {
        return invalid("fit handle is null");
    };
    copy_curve(&f.0.sup_measures, buf, cap)
}

/// Release a fit handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn kinreg_fit_free(fit: *mut KinregFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Fractional smoothness of a uniformly sampled one-dimensional signal via
/// Littlewood–Paley block-norm decay in `L^q`.
///
/// Writes the fitted exponent and the fit's r². When the estimator refuses
/// (too few resolvable blocks above the numerical floor) both outputs are
/// NaN and the call still returns `KINREG_STATUS_OK`; structurally impossible
/// fits (signal too short) fail instead.
#[no_mangle]
pub unsafe extern "C" fn kinreg_besov_slope(
    data: *const f64,
    len: usize,
    q: f64,
    out_s: *mut f64,
    out_r_squared: *mut f64,
) -> KinregStatus {
    guard(|| {
        if data.is_null() {
            return invalid("data pointer is null");
        }
        if out_s.is_null() || out_r_squared.is_null() {
            return invalid("out pointer is null");
        }
        if len < 2 {
            return invalid("signal must hold at least 2 samples");
        }
        let values = slice::from_raw_parts(data, len).to_vec();
        let field = match Field::from_vec(&[len], values) {
            Ok(field) => field,
            Err(err) => return report(&err),
        };
        let partition = DyadicPartition::for_grid(&[len]);
        match regularity::besov_slope(&field, &partition, q, None) {
            Ok(slope) => {
                *out_s = slope.fitted_s.unwrap_or(f64::NAN);
                *out_r_squared = slope.r_squared.unwrap_or(f64::NAN);
                KinregStatus::Ok
            }
            Err(err) => report(&err),
        }
    })
}
