//! C interface to `regcca`. Matrices cross the boundary as column-major
//! `double` arrays. Every call returns a [`RegccaStatus`]; on failure
//! [`regcca_last_error_message`] describes the most recent error on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use regcca::estimators::{EstimatorKind, EstimatorSpec};
use regcca::glasso::{glasso_fit, GlassoOptions};
use regcca::linalg::Matrix;
use regcca::cca::CcaEstimate;
use regcca::data::PairedDataset;
use regcca::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegccaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Convergence = 3,
    Numerical = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegccaEstimator {
    Rcca = 0,
    Spls = 1,
    Scca = 2,
    Gcca = 3,
}

impl From<RegccaEstimator> for EstimatorKind {
    fn from(k: RegccaEstimator) -> Self {
        match k {
            RegccaEstimator::Rcca => EstimatorKind::Rcca,
            RegccaEstimator::Spls => EstimatorKind::Spls,
            RegccaEstimator::Scca => EstimatorKind::Scca,
            RegccaEstimator::Gcca => EstimatorKind::Gcca,
        }
    }
}

/// Bit flags reported by [`regcca_estimate_flags`].
pub const REGCCA_FLAG_DEGENERATE: u32 = 1;
pub const REGCCA_FLAG_RANK_DEFICIENT: u32 = 2;
pub const REGCCA_FLAG_NOT_CONVERGED: u32 = 4;

/// Opaque paired dataset.
pub struct RegccaDataset(PairedDataset);

/// Opaque fitted estimate.
pub struct RegccaEstimate(CcaEstimate);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> RegccaStatus {
    match err {
        Error::Convergence { .. } => RegccaStatus::Convergence,
        Error::NonFinite | Error::RankDeficient { .. } | Error::ZeroVariance { .. } | Error::NotOrthonormal { .. } => {
            RegccaStatus::Numerical
        }
        _ => RegccaStatus::InvalidInput,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (RegccaStatus, String)>) -> RegccaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RegccaStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("panic: {msg}"));
            RegccaStatus::Panic
        }
    }
}

fn lib<T>(r: regcca::Result<T>) -> Result<T, (RegccaStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (RegccaStatus, String) {
    (RegccaStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (RegccaStatus, String) {
    (RegccaStatus::InvalidInput, msg.into())
}

unsafe fn read_matrix(data: *const f64, rows: usize, cols: usize, what: &str) -> Result<Matrix, (RegccaStatus, String)> {
    if rows == 0 || cols == 0 {
        return Err(invalid(format!("{what} must have positive dimensions")));
    }
    if data.is_null() {
        return Err(null(what));
    }
    let len = rows.checked_mul(cols).ok_or_else(|| invalid(format!("{what} is too large")))?;
    Ok(Matrix::from_column_slice(rows, cols, std::slice::from_raw_parts(data, len)))
}

unsafe fn write_matrix(m: &Matrix, out: *mut f64, len: usize) -> Result<(), (RegccaStatus, String)> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len < m.len() {
        return Err(invalid(format!("output buffer holds {len} values, {} needed", m.len())));
    }
    ptr::copy_nonoverlapping(m.as_slice().as_ptr(), out, m.len());
    Ok(())
}

/// Message for the last failed call on this thread (empty after a success).
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn regcca_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn regcca_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!(),
    };
    VERSION.as_ptr()
}

/// Build a dataset from `x` (`n × p`) and `y` (`n × q`), both column-major.
/// The data are copied and column-centred.
///
/// # Safety
/// `x` and `y` must point to `n*p` and `n*q` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn regcca_dataset_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    q: usize,
    out: *mut *mut RegccaDataset,
) -> RegccaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let x = read_matrix(x, n, p, "x")?;
        let y = read_matrix(y, n, q, "y")?;
        let data = lib(PairedDataset::new(x, y))?.ensure_centred();
        *out = Box::into_raw(Box::new(RegccaDataset(data)));
        Ok(())
    })
}

/// # Safety
/// `data` must come from [`regcca_dataset_new`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn regcca_dataset_free(data: *mut RegccaDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Fit `k` canonical pairs with the chosen estimator and penalty.
///
/// # Safety
/// `data` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn regcca_fit(
    data: *const RegccaDataset,
    estimator: RegccaEstimator,
    penalty: f64,
    k: usize,
    out: *mut *mut RegccaEstimate,
) -> RegccaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let data = data.as_ref().ok_or_else(|| null("data"))?;
        let kind = EstimatorKind::from(estimator);
        lib(kind.check_penalty(penalty))?;
        let kmax = data.0.p().min(data.0.q());
        if k == 0 || k > kmax {
            return Err(invalid(format!("k = {k} must lie in 1..={kmax}")));
        }
        let est = lib(EstimatorSpec::new(kind, penalty, k).fit(&data.0))?;
        *out = Box::into_raw(Box::new(RegccaEstimate(est)));
        Ok(())
    })
}

/// # Safety
/// `est` must come from [`regcca_fit`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn regcca_estimate_free(est: *mut RegccaEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Number of pairs, and the two view dimensions.
///
/// # Safety
/// `est` must be a live handle; each output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn regcca_estimate_dims(
    est: *const RegccaEstimate,
    k: *mut usize,
    p: *mut usize,
    q: *mut usize,
) -> RegccaStatus {
    guard(|| {
        let est = &est.as_ref().ok_or_else(|| null("estimate"))?.0;
        for (ptr, v) in [(k, est.k()), (p, est.u.nrows()), (q, est.v.nrows())] {
            if let Some(slot) = ptr.as_mut() {
                *slot = v;
            }
        }
        Ok(())
    })
}

/// Copy the `k` canonical correlations into `out` (capacity `len`).
///
/// # Safety
/// `est` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn regcca_estimate_rho(est: *const RegccaEstimate, out: *mut f64, len: usize) -> RegccaStatus {
    guard(|| {
        let est = &est.as_ref().ok_or_else(|| null("estimate"))?.0;
        write_matrix(&Matrix::from_column_slice(est.k(), 1, est.rho.as_slice()), out, len)
    })
}

/// Copy the `p × k` X-view directions (column-major) into `out`.
///
/// # Safety
/// `est` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn regcca_estimate_u(est: *const RegccaEstimate, out: *mut f64, len: usize) -> RegccaStatus {
    guard(|| write_matrix(&est.as_ref().ok_or_else(|| null("estimate"))?.0.u, out, len))
}

/// Copy the `q × k` Y-view directions (column-major) into `out`.
///
/// # Safety
/// `est` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn regcca_estimate_v(est: *const RegccaEstimate, out: *mut f64, len: usize) -> RegccaStatus {
    guard(|| write_matrix(&est.as_ref().ok_or_else(|| null("estimate"))?.0.v, out, len))
}

/// Bitwise OR of the `REGCCA_FLAG_*` constants.
///
/// # Safety
/// `est` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn regcca_estimate_flags(est: *const RegccaEstimate, out: *mut u32) -> RegccaStatus {
    guard(|| {
        let f = &est.as_ref().ok_or_else(|| null("estimate"))?.0.flags;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = [
            (f.degenerate, REGCCA_FLAG_DEGENERATE),
            (f.rank_deficient, REGCCA_FLAG_RANK_DEFICIENT),
            (f.not_converged, REGCCA_FLAG_NOT_CONVERGED),
        ]
        .iter()
        .filter(|(set, _)| *set)
        .fold(0, |acc, (_, bit)| acc | bit);
        Ok(())
    })
}

/// Graphical lasso on the `d × d` covariance `c`, writing the precision
/// estimate (column-major) into `omega_out`.
///
/// # Safety
/// `c` must hold `d*d` doubles and `omega_out` must hold `d*d` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn regcca_glasso(c: *const f64, d: usize, lambda: f64, omega_out: *mut f64) -> RegccaStatus {
    guard(|| {
        let c = read_matrix(c, d, d, "c")?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda {lambda} must be positive")));
        }
        let fit = lib(glasso_fit(&c, lambda, &GlassoOptions::default()))?;
        write_matrix(&fit.omega, omega_out, d * d)
    })
}
