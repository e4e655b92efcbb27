//! C ABI over `robust_linreg`.
//!
//! Conventions:
//! - Every entry point returns an [`RlStatus`]; results go through out-pointers.
//! - Handles are opaque and owned by the caller once returned; free them with
//!   the matching `*_free`, which accepts NULL.
//! - On failure the message is kept per thread and read with
//!   [`rl_last_error_message`]. Out-pointers are left untouched.
//! - Panics never cross the boundary; they surface as `RL_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use robust_linreg::dro::worst_case_distribution;
use robust_linreg::solver::{solve_penalized, SolverOptions};
use robust_linreg::transport::{msw_empirical, SearchOptions};
use robust_linreg::tuning::{delta_asymptotic, kolmogorov_quantile, TuningInputs};
use robust_linreg::{load_dataset, BaseNorm, Dataset, Error, PenaltySpec, RobustProblem};

/// Outcome of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Dimension = 5,
    Unsupported = 6,
    Degenerate = 7,
    /// The solver hit its iteration cap; outputs are still written.
    NotConverged = 8,
    Panic = 9,
}

/// Base norms for the sliced distance.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RlNorm {
    L1 = 0,
    L2 = 1,
    Linf = 2,
}

/// A dataset of `n` rows, `d` covariates and one outcome.
pub struct RlDataset {
    inner: Dataset,
}

/// A penalty function.
pub struct RlPenalty {
    inner: PenaltySpec,
}

/// Scalar diagnostics of a solve.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct RlSolveInfo {
    pub objective_value: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> RlStatus {
    match e {
        Error::Io { .. } => RlStatus::Io,
        Error::Parse { .. } => RlStatus::Parse,
        Error::Validation(_) => RlStatus::InvalidArgument,
        Error::Dimension { .. } => RlStatus::Dimension,
        Error::Unsupported(_) => RlStatus::Unsupported,
        Error::Degenerate(_) => RlStatus::Degenerate,
    }
}

/// Internal failure carrying its status.
struct Fail(RlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RlStatus::NullPointer, format!("{what} is NULL"))
}

fn guard(f: impl FnOnce() -> Result<RlStatus, Fail>) -> RlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => {
            if s == RlStatus::Ok {
                set_error(String::new());
            }
            s
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            RlStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be NULL or valid for `len` reads.
unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be NULL or a valid NUL-terminated string.
unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RlStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// # Safety
/// `p` must be NULL or point to a live handle.
unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn out<T>(p: *mut T, what: &str) -> Result<*mut T, Fail> {
    if p.is_null() {
        Err(null(what))
    } else {
        Ok(p)
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes, excluding
/// the terminator; 0 when the last call succeeded.
///
/// # Safety
/// `buf` must be NULL or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a dataset from row-major `x` (`n * d` values) and `y` (`n` values).
///
/// # Safety
/// `x` and `y` must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rl_dataset_new(x: *const f64, n: usize, d: usize, y: *const f64, out_ds: *mut *mut RlDataset) -> RlStatus {
    guard(|| {
        let o = out(out_ds, "out")?;
        let len = n.checked_mul(d).ok_or_else(|| Fail(RlStatus::InvalidArgument, "n * d overflows".into()))?;
        let x = slice(x, len, "x")?.to_vec();
        let y = slice(y, n, "y")?.to_vec();
        let inner = Dataset::from_flat(d, x, y)?;
        *o = Box::into_raw(Box::new(RlDataset { inner }));
        Ok(RlStatus::Ok)
    })
}

/// Loads a headed CSV file; `outcome` names the outcome column.
///
/// # Safety
/// `path` and `outcome` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rl_dataset_load_csv(path: *const c_char, outcome: *const c_char, out_ds: *mut *mut RlDataset) -> RlStatus {
    guard(|| {
        let o = out(out_ds, "out")?;
        let inner = load_dataset(Path::new(string(path, "path")?), string(outcome, "outcome")?)?;
        *o = Box::into_raw(Box::new(RlDataset { inner }));
        Ok(RlStatus::Ok)
    })
}

/// # Safety
/// `ds` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_dataset_free(ds: *mut RlDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Writes the row and covariate counts.
///
/// # Safety
/// `ds` must be a live handle; `n` and `d` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rl_dataset_shape(ds: *const RlDataset, n: *mut usize, d: *mut usize) -> RlStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        let (n, d) = (out(n, "n")?, out(d, "d")?);
        *n = ds.inner.n();
        *d = ds.inner.d();
        Ok(RlStatus::Ok)
    })
}

/// Copies the row-major covariates (`n * d` values) and the outcome (`n`
/// values). Either buffer may be NULL to skip it.
///
/// # Safety
/// Non-NULL buffers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn rl_dataset_copy(ds: *const RlDataset, x: *mut f64, x_len: usize, y: *mut f64, y_len: usize) -> RlStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        let (src_x, src_y) = (ds.inner.x_flat(), ds.inner.y());
        if !x.is_null() {
            if x_len != src_x.len() {
                return Err(Error::Dimension { expected: src_x.len(), got: x_len }.into());
            }
            std::ptr::copy_nonoverlapping(src_x.as_ptr(), x, x_len);
        }
        if !y.is_null() {
            if y_len != src_y.len() {
                return Err(Error::Dimension { expected: src_y.len(), got: y_len }.into());
            }
            std::ptr::copy_nonoverlapping(src_y.as_ptr(), y, y_len);
        }
        Ok(RlStatus::Ok)
    })
}

fn new_penalty(spec: PenaltySpec, o: *mut *mut RlPenalty) -> Result<RlStatus, Fail> {
    let o = out(o, "out")?;
    spec.validate()?;
    // SAFETY: checked non-NULL above; the caller guarantees writability.
    unsafe { *o = Box::into_raw(Box::new(RlPenalty { inner: spec })) };
    Ok(RlStatus::Ok)
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rl_penalty_l1(out_pen: *mut *mut RlPenalty) -> RlStatus {
    guard(|| new_penalty(PenaltySpec::L1, out_pen))
}

/// The `l_p` norm, `p >= 1`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rl_penalty_lp(p: f64, out_pen: *mut *mut RlPenalty) -> RlStatus {
    guard(|| new_penalty(PenaltySpec::Lp { p }, out_pen))
}

/// Sorted-l1 penalty with non-increasing, nonnegative weights.
///
/// # Safety
/// `lambda` must be valid for `len` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rl_penalty_slope(lambda: *const f64, len: usize, out_pen: *mut *mut RlPenalty) -> RlStatus {
    guard(|| new_penalty(PenaltySpec::Slope { lambda: slice(lambda, len, "lambda")?.to_vec() }, out_pen))
}

/// # Safety
/// `pen` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_penalty_free(pen: *mut RlPenalty) {
    if !pen.is_null() {
        drop(Box::from_raw(pen));
    }
}

/// Evaluates the penalty at `beta`.
///
/// # Safety
/// `beta` must be valid for `len` reads; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rl_penalty_eval(pen: *const RlPenalty, beta: *const f64, len: usize, value: *mut f64) -> RlStatus {
    guard(|| {
        let pen = handle(pen, "penalty")?;
        let v = out(value, "value")?;
        *v = pen.inner.eval(slice(beta, len, "beta")?)?;
        Ok(RlStatus::Ok)
    })
}

/// Minimizes `rn_r(beta) + delta rho(beta)`. `beta_out` receives `d` values.
/// `max_iter = 0` or `kkt_tol <= 0` select the defaults. Returns
/// `RL_STATUS_NOT_CONVERGED` with outputs written when the cap is hit.
///
/// # Safety
/// Handles must be live; `beta_out` must be valid for `beta_len` writes;
/// `info` may be NULL.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn rl_solve(
    ds: *const RlDataset,
    pen: *const RlPenalty,
    r: f64,
    sigma: f64,
    delta: f64,
    max_iter: usize,
    kkt_tol: f64,
    beta_out: *mut f64,
    beta_len: usize,
    info: *mut RlSolveInfo,
) -> RlStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        let pen = handle(pen, "penalty")?;
        let b = out(beta_out, "beta_out")?;
        if beta_len != ds.inner.d() {
            return Err(Error::Dimension { expected: ds.inner.d(), got: beta_len }.into());
        }
        let prob = RobustProblem::new(r, sigma, delta, pen.inner.clone())?;
        let mut opts = SolverOptions::default();
        if max_iter > 0 {
            opts.max_iter = max_iter;
        }
        if kkt_tol > 0.0 {
            opts.kkt_tol = kkt_tol;
        }
        let rep = solve_penalized(&ds.inner, &prob, &opts)?;
        std::ptr::copy_nonoverlapping(rep.beta_hat.as_ptr(), b, beta_len);
        if let Some(i) = info.as_mut() {
            *i = RlSolveInfo { objective_value: rep.objective_value, kkt_residual: rep.kkt_residual, iterations: rep.iterations, converged: rep.converged };
        }
        if rep.converged {
            Ok(RlStatus::Ok)
        } else {
            set_error(format!("no convergence after {} iterations (kkt residual {:e})", rep.iterations, rep.kkt_residual));
            Ok(RlStatus::NotConverged)
        }
    })
}

/// The worst-case perturbation of `ds` at `beta` as a new dataset.
///
/// # Safety
/// Handles must be live; `beta` valid for `beta_len` reads; `out` writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn rl_worst_case(
    ds: *const RlDataset,
    pen: *const RlPenalty,
    r: f64,
    sigma: f64,
    delta: f64,
    beta: *const f64,
    beta_len: usize,
    out_ds: *mut *mut RlDataset,
) -> RlStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        let pen = handle(pen, "penalty")?;
        let o = out(out_ds, "out")?;
        let prob = RobustProblem::new(r, sigma, delta, pen.inner.clone())?;
        let ps = worst_case_distribution(&ds.inner, &prob, slice(beta, beta_len, "beta")?)?;
        *o = Box::into_raw(Box::new(RlDataset { inner: ps.perturbed }));
        Ok(RlStatus::Ok)
    })
}

/// Sampled max-sliced `W_r` between two datasets of equal dimension, over the
/// unit sphere of `norm`. `direction` (may be NULL) receives `d + 1` values.
///
/// # Safety
/// Handles must be live; `value` writable; `direction` NULL or valid for `direction_len` writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn rl_msw(
    p: *const RlDataset,
    q: *const RlDataset,
    r: f64,
    norm: RlNorm,
    seed: u64,
    value: *mut f64,
    direction: *mut f64,
    direction_len: usize,
) -> RlStatus {
    guard(|| {
        let (p, q) = (handle(p, "p")?, handle(q, "q")?);
        let v = out(value, "value")?;
        let base = match norm {
            RlNorm::L1 => BaseNorm::L1,
            RlNorm::L2 => BaseNorm::L2,
            RlNorm::Linf => BaseNorm::Linf,
        };
        let rep = msw_empirical(&p.inner, &q.inner, r, base, &SearchOptions { seed, ..Default::default() })?;
        let g = &rep.argmax_direction.gamma_tilde;
        if !direction.is_null() {
            if direction_len != g.len() {
                return Err(Error::Dimension { expected: g.len(), got: direction_len }.into());
            }
            std::ptr::copy_nonoverlapping(g.as_ptr(), direction, g.len());
        }
        *v = rep.value;
        Ok(RlStatus::Ok)
    })
}

/// `c_{rho,d} (q_{1-alpha} / sqrt(n))^(1/r) diam` with `c_{rho,d} = max(1/c_d, 1)`.
///
/// # Safety
/// `delta` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rl_delta_asymptotic(n: usize, r: f64, alpha: f64, diam: f64, c_d: f64, delta: *mut f64) -> RlStatus {
    guard(|| {
        let o = out(delta, "delta")?;
        if !(c_d > 0.0 && c_d.is_finite()) {
            return Err(Fail(RlStatus::InvalidArgument, format!("c_d must be positive, got {c_d}")));
        }
        let t = TuningInputs { n, d: 1, r, s: 2.0 * r + 1.0, alpha, gamma: None, c_d, diam: Some(diam), sigma: 1.0 };
        *o = delta_asymptotic(&t)?;
        Ok(RlStatus::Ok)
    })
}

/// Quantile of the Kolmogorov distribution.
///
/// # Safety
/// `q` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rl_kolmogorov_quantile(p: f64, q: *mut f64) -> RlStatus {
    guard(|| {
        let o = out(q, "q")?;
        *o = kolmogorov_quantile(p)?;
        Ok(RlStatus::Ok)
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_are_contained() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, RlStatus::Panic);
        let mut buf = [0 as c_char; 64];
        let n = unsafe { rl_last_error_message(buf.as_mut_ptr(), buf.len()) };
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert_eq!(n, msg.len());
        assert!(msg.contains("boom"));
    }

    #[test]
    fn error_message_truncates() {
        set_error("abcdef".into());
        let mut buf = [1 as c_char; 4];
        assert_eq!(unsafe { rl_last_error_message(buf.as_mut_ptr(), 4) }, 6);
        assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_bytes(), b"abc");
    }
}
