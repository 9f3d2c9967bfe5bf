//! C ABI over `quadinfer`.
//!
//! Fits are opaque heap handles created by `qi_fit_new` and released by
//! `qi_fit_free`. Every fallible call returns a `QiStatus`; on failure the
//! message is retrievable with `qi_last_error_message` on the same thread.
//! Matrices are row-major. Absent values in `QiResult` are NaN.

use std::cell::RefCell;
use std::ffi::{c_char, c_int};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use quadinfer::linalg::{ols_fit, Dataset, ModelFit};
use quadinfer::nalgebra::{DMatrix, DVector};
use quadinfer::onesample::{
    ci_eta, confidence_region_contains, linear_functional_inference, test_conventional, test_error_variance, test_eta,
    test_global, test_quad_norm, test_rho, test_signal_detection,
};
use quadinfer::twosample::{test_coheritability, test_equality, theta_hat};
use quadinfer::{Error, Flag, InferenceResult, Method, Side, TwoSampleFit};

/// Call outcome.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QiStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad argument value or shape.
    InvalidArgument = 2,
    /// Numerical degeneracy: singular or rank-deficient design, zero variance, nonpositive denominator.
    Numerical = 3,
    /// Internal panic caught at the boundary.
    Internal = 4,
}

/// Bits of `QiResult::flags`.
pub const QI_FLAG_ZETA_N_FLOORED: u32 = 1 << 0;
pub const QI_FLAG_ZETA_STAR_FLOORED: u32 = 1 << 1;
pub const QI_FLAG_NU4_FLOORED: u32 = 1 << 2;
pub const QI_FLAG_ZETA_EPS_FLOORED: u32 = 1 << 3;
pub const QI_FLAG_SIGMA_ETA_FLOORED: u32 = 1 << 4;
pub const QI_FLAG_SIGMA_RHO_FLOORED: u32 = 1 << 5;
pub const QI_FLAG_SIGMA_RHO_CONVENTIONAL_FLOORED: u32 = 1 << 6;
pub const QI_FLAG_SIGMA_DIFF_FLOORED: u32 = 1 << 7;
pub const QI_FLAG_SIGMA_THETA_FLOORED: u32 = 1 << 8;
pub const QI_FLAG_SIGMA_THETA_CONVENTIONAL_FLOORED: u32 = 1 << 9;
pub const QI_FLAG_INTERVAL_CLAMPED: u32 = 1 << 10;

/// Outcome of one test. Intervals are clamped to the parameter range; the
/// `raw_` endpoints are before clamping.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QiResult {
    pub estimate: f64,
    pub null_value: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
    /// NaN when the test has no one-sided form.
    pub one_sided_p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub raw_ci_low: f64,
    pub raw_ci_high: f64,
    pub alpha: f64,
    pub flags: u32,
}

impl From<&InferenceResult> for QiResult {
    fn from(r: &InferenceResult) -> Self {
        QiResult {
            estimate: r.estimate,
            null_value: r.null_value,
            std_error: r.std_error,
            z: r.z,
            p_value: r.p_value,
            one_sided_p: r.one_sided_p.unwrap_or(f64::NAN),
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            raw_ci_low: r.raw_ci_low,
            raw_ci_high: r.raw_ci_high,
            alpha: r.alpha,
            flags: r.flags.iter().fold(0, |acc, f: &Flag| acc | f.bit()),
        }
    }
}

/// Opaque one-sample fit.
pub struct QiFit {
    fit: ModelFit,
    dropped: Vec<usize>,
}

/// Opaque pair of fits.
pub struct QiTwoSample {
    ts: TwoSampleFit,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> QiStatus {
    if err.is_numerical() {
        QiStatus::Numerical
    } else {
        QiStatus::InvalidArgument
    }
}

/// Run `body`, translating errors and panics into status codes.
fn guard<F>(body: F) -> QiStatus
where
    F: FnOnce() -> Result<(), (QiStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error(String::new());
            QiStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            QiStatus::Internal
        }
    }
}

fn lib<T>(r: quadinfer::Result<T>) -> Result<T, (QiStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null_ptr(what: &str) -> (QiStatus, String) {
    (QiStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], (QiStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null_ptr(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn fit_ref<'a>(fit: *const QiFit) -> Result<&'a QiFit, (QiStatus, String)> {
    fit.as_ref().ok_or_else(|| null_ptr("fit"))
}

unsafe fn write_result(out: *mut QiResult, r: quadinfer::Result<InferenceResult>) -> Result<(), (QiStatus, String)> {
    if out.is_null() {
        return Err(null_ptr("out"));
    }
    let r = lib(r)?;
    *out = QiResult::from(&r);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn qi_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Fit least squares of `y` (length `n`) on the row-major `n × p` matrix `x`.
/// With `center` nonzero both are centered first. Linearly dependent columns
/// are dropped; see `qi_fit_dropped`.
///
/// # Safety
/// `y` and `x` must be valid for `n` and `n * p` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qi_fit_new(
    y: *const f64,
    x: *const f64,
    n: usize,
    p: usize,
    center: c_int,
    out: *mut *mut QiFit,
) -> QiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_ptr("out"));
        }
        *out = ptr::null_mut();
        let cells = n
            .checked_mul(p)
            .ok_or((QiStatus::InvalidArgument, "n * p overflows".into()))?;
        if n == 0 || p == 0 {
            return Err((QiStatus::InvalidArgument, "n and p must be positive".into()));
        }
        let y = DVector::from_column_slice(slice(y, n, "y")?);
        let x = DMatrix::from_row_slice(n, p, slice(x, cells, "x")?);
        let data = lib(Dataset::prepare(y, x, center != 0))?;
        let fit = lib(ols_fit(&data))?;
        *out = Box::into_raw(Box::new(QiFit {
            fit,
            dropped: data.dropped_columns,
        }));
        Ok(())
    })
}

/// Release a fit. Null is ignored.
///
/// # Safety
/// `fit` must come from `qi_fit_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qi_fit_free(fit: *mut QiFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Number of observations; 0 for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qi_fit_n(fit: *const QiFit) -> usize {
    fit.as_ref().map_or(0, |f| f.fit.n())
}

/// Number of columns kept after rank repair; 0 for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qi_fit_p(fit: *const QiFit) -> usize {
    fit.as_ref().map_or(0, |f| f.fit.p())
}

/// Residual variance estimate; NaN for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qi_fit_sigma2(fit: *const QiFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.fit.sigma2_hat)
}

/// Copy the coefficients (length `qi_fit_p`) into `out`.
///
/// # Safety
/// `out` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qi_fit_beta_hat(fit: *const QiFit, out: *mut f64, len: usize) -> QiStatus {
    guard(|| {
        let f = fit_ref(fit)?;
        let beta = f.fit.beta_hat.as_slice();
        if len != beta.len() {
            return Err((
                QiStatus::InvalidArgument,
                format!("need {} slots, got {len}", beta.len()),
            ));
        }
        if out.is_null() {
            return Err(null_ptr("out"));
        }
        ptr::copy_nonoverlapping(beta.as_ptr(), out, len);
        Ok(())
    })
}

/// Number of columns removed by rank repair; 0 for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qi_fit_dropped_count(fit: *const QiFit) -> usize {
    fit.as_ref().map_or(0, |f| f.dropped.len())
}

/// Copy the removed original column indices (ascending) into `out`.
///
/// # Safety
/// `out` must be valid for `len` entries.
#[no_mangle]
pub unsafe extern "C" fn qi_fit_dropped(fit: *const QiFit, out: *mut usize, len: usize) -> QiStatus {
    guard(|| {
        let f = fit_ref(fit)?;
        if len != f.dropped.len() {
            return Err((
                QiStatus::InvalidArgument,
                format!("need {} slots, got {len}", f.dropped.len()),
            ));
        }
        if len > 0 {
            if out.is_null() {
                return Err(null_ptr("out"));
            }
            ptr::copy_nonoverlapping(f.dropped.as_ptr(), out, len);
        }
        Ok(())
    })
}

/// Test `‖β₀‖ = c0` with the bias- and variance-corrected statistic.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qi_test_quad_norm(fit: *const QiFit, c0: f64, alpha: f64, out: *mut QiResult) -> QiStatus {
    guard(|| write_result(out, test_quad_norm(&fit_ref(fit)?.fit, c0, alpha)))
}

/// The uncorrected statistic, for comparison.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qi_test_conventional(fit: *const QiFit, c0: f64, alpha: f64, out: *mut QiResult) -> QiStatus {
    guard(|| write_result(out, test_conventional(&fit_ref(fit)?.fit, c0, alpha)))
}

/// Test `β₀ = 0`.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qi_test_signal(fit: *const QiFit, alpha: f64, out: *mut QiResult) -> QiStatus {
    guard(|| write_result(out, test_signal_detection(&fit_ref(fit)?.fit, alpha)))
}

/// Test `β₀ = beta_null` (length `qi_fit_p`).
///
/// # Safety
/// `beta_null` must be valid for `len` doubles; `fit` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qi_test_global(
    fit: *const QiFit,
    beta_null: *const f64,
    len: usize,
    alpha: f64,
    out: *mut QiResult,
) -> QiStatus {
    guard(|| {
        let f = fit_ref(fit)?;
        let b = DVector::from_column_slice(slice(beta_null, len, "beta_null")?);
        write_result(out, test_global(&f.fit, &b, alpha))
    })
}

/// Whether `beta` lies in the confidence region; `two_sided` selects the form.
///
/// # Safety
/// `beta` must be valid for `len` doubles; `fit` live; `inside` writable.
#[no_mangle]
pub unsafe extern "C" fn qi_region_contains(
    fit: *const QiFit,
    beta: *const f64,
    len: usize,
    alpha: f64,
    two_sided: c_int,
    inside: *mut c_int,
) -> QiStatus {
    guard(|| {
        let f = fit_ref(fit)?;
        if inside.is_null() {
            return Err(null_ptr("inside"));
        }
        let b = DVector::from_column_slice(slice(beta, len, "beta")?);
        let side = if two_sided != 0 { Side::Two } else { Side::One };
        *inside = lib(confidence_region_contains(&f.fit, &b, alpha, side))? as c_int;
        Ok(())
    })
}

/// Test `σ²ε = sigma2_null`.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qi_test_error_variance(
    fit: *const QiFit,
    sigma2_null: f64,
    alpha: f64,
    out: *mut QiResult,
) -> QiStatus {
    guard(|| {
        let f = &fit_ref(fit)?.fit;
        write_result(out, test_error_variance(f, &f.residuals, sigma2_null, alpha))
    })
}

/// Test the fraction of variance explained; `conventional` nonzero selects the uncorrected form.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qi_test_rho(
    fit: *const QiFit,
    rho_null: f64,
    alpha: f64,
    conventional: c_int,
    out: *mut QiResult,
) -> QiStatus {
    let method = if conventional != 0 {
        Method::Conventional
    } else {
        Method::Proposed
    };
    guard(|| write_result(out, test_rho(&fit_ref(fit)?.fit, rho_null, alpha, method)))
}

/// Test the signal strength `β₀ᵀΣβ₀ = eta_null`.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qi_test_eta(fit: *const QiFit, eta_null: f64, alpha: f64, out: *mut QiResult) -> QiStatus {
    guard(|| write_result(out, test_eta(&fit_ref(fit)?.fit, eta_null, alpha)))
}

/// Confidence interval for the signal strength.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qi_ci_eta(fit: *const QiFit, alpha: f64, out: *mut QiResult) -> QiStatus {
    guard(|| write_result(out, ci_eta(&fit_ref(fit)?.fit, alpha)))
}

/// Inference on `cᵀβ₀` with `c` of length `qi_fit_p`.
///
/// # Safety
/// `c` must be valid for `len` doubles; `fit` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qi_test_linear(
    fit: *const QiFit,
    c: *const f64,
    len: usize,
    null_value: f64,
    alpha: f64,
    out: *mut QiResult,
) -> QiStatus {
    guard(|| {
        let f = fit_ref(fit)?;
        let c = DVector::from_column_slice(slice(c, len, "c")?);
        write_result(out, linear_functional_inference(&f.fit, &c, null_value, alpha))
    })
}

/// Pair two fits with equal column counts. The inputs stay owned by the caller.
///
/// # Safety
/// `a` and `b` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qi_two_sample_new(a: *const QiFit, b: *const QiFit, out: *mut *mut QiTwoSample) -> QiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_ptr("out"));
        }
        *out = ptr::null_mut();
        let (a, b) = (fit_ref(a)?, fit_ref(b)?);
        let ts = lib(TwoSampleFit::new(a.fit.clone(), b.fit.clone()))?;
        *out = Box::into_raw(Box::new(QiTwoSample { ts }));
        Ok(())
    })
}

/// Release a pair. Null is ignored.
///
/// # Safety
/// `ts` must come from `qi_two_sample_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qi_two_sample_free(ts: *mut QiTwoSample) {
    if !ts.is_null() {
        drop(Box::from_raw(ts));
    }
}

unsafe fn pair_ref<'a>(ts: *const QiTwoSample) -> Result<&'a QiTwoSample, (QiStatus, String)> {
    ts.as_ref().ok_or_else(|| null_ptr("two-sample handle"))
}

/// Test equality of the two coefficient vectors.
///
/// # Safety
/// `ts` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qi_test_equality(ts: *const QiTwoSample, alpha: f64, out: *mut QiResult) -> QiStatus {
    guard(|| write_result(out, test_equality(&pair_ref(ts)?.ts, alpha)))
}

/// Normalized inner product of the two coefficient vectors.
///
/// # Safety
/// `ts` must be a live handle and `theta` writable.
#[no_mangle]
pub unsafe extern "C" fn qi_theta_hat(ts: *const QiTwoSample, theta: *mut f64) -> QiStatus {
    guard(|| {
        let pair = pair_ref(ts)?;
        if theta.is_null() {
            return Err(null_ptr("theta"));
        }
        *theta = lib(theta_hat(&pair.ts))?;
        Ok(())
    })
}

/// Test the angle `θ₀ = theta_null`; `conventional` nonzero selects the uncorrected form.
///
/// # Safety
/// `ts` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qi_test_coheritability(
    ts: *const QiTwoSample,
    theta_null: f64,
    alpha: f64,
    conventional: c_int,
    out: *mut QiResult,
) -> QiStatus {
    let method = if conventional != 0 {
        Method::Conventional
    } else {
        Method::Proposed
    };
    guard(|| write_result(out, test_coheritability(&pair_ref(ts)?.ts, theta_null, alpha, method)))
}
