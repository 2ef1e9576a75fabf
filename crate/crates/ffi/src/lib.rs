//! C ABI for `lcbound`.
//!
//! Objects are opaque handles created by `*_new` functions and released by the matching
//! `*_free`. Every fallible call returns an [`LcbStatus`]; on failure the message is kept per
//! thread and can be copied out with [`lcb_last_error_message`]. Panics never cross the
//! boundary and are reported as [`LcbStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lcbound::bounds::{bound_main_b, BoundReport};
use lcbound::drift::PowerPhi;
use lcbound::gig1::{modified_kernel, Assembled};
use lcbound::solver::{stationary_gth, total_variation, FiniteStochasticMatrix, ProbabilityVector};
use lcbound::special::{bound_special, closed_form_params, plan_tolerance_special, SpecialCaseParams};
use lcbound::truncation::lc_block_augment;
use lcbound::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    ToleranceUnreachable = 4,
    HypothesisViolated = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

impl From<&Error> for LcbStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Config(_) | Error::Io(_) => LcbStatus::InvalidArgument,
            Error::Domain(_) => LcbStatus::Domain,
            Error::ToleranceUnreachable { .. } => LcbStatus::ToleranceUnreachable,
            Error::HypothesisViolated(_) | Error::NotBlockMonotone { .. } => LcbStatus::HypothesisViolated,
            _ => LcbStatus::Numerical,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard(f: impl FnOnce() -> Result<(), (LcbStatus, String)>) -> LcbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            LcbStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside lcbound".into());
            LcbStatus::Panic
        }
    }
}

fn lift(e: Error) -> (LcbStatus, String) {
    (LcbStatus::from(&e), e.to_string())
}

fn null(name: &str) -> (LcbStatus, String) {
    (LcbStatus::NullPointer, format!("{name} is null"))
}

/// Copies the calling thread's last error message into `buf` as a NUL-terminated string,
/// truncating if needed. Returns the full message length excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lcb_last_error_message(buf: *mut c_char, len: usize) -> usize {
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

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn lcb_status_name(status: LcbStatus) -> *const c_char {
    let s: &'static CStr = match status {
        LcbStatus::Ok => c"ok",
        LcbStatus::NullPointer => c"null pointer",
        LcbStatus::InvalidArgument => c"invalid argument",
        LcbStatus::Domain => c"domain error",
        LcbStatus::ToleranceUnreachable => c"tolerance unreachable",
        LcbStatus::HypothesisViolated => c"hypothesis violated",
        LcbStatus::Numerical => c"numerical failure",
        LcbStatus::BufferTooSmall => c"buffer too small",
        LcbStatus::Panic => c"panic",
    };
    s.as_ptr()
}

/// The two terms of a bound and their sum.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LcbBound {
    pub m: f64,
    pub n: f64,
    pub bound: f64,
    pub term_mixing: f64,
    pub term_truncation: f64,
}

impl From<BoundReport> for LcbBound {
    fn from(r: BoundReport) -> Self {
        LcbBound { m: r.m, n: r.n, bound: r.bound_value, term_mixing: r.term_mixing, term_truncation: r.term_truncation }
    }
}

/// Closed-form constants of the zeta example.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LcbSpecialConstants {
    pub kappa: f64,
    pub epsilon: f64,
    pub delta0: f64,
    pub x0: f64,
    pub rho: f64,
    pub c1: f64,
    pub c2: f64,
    pub k: u64,
    pub b: f64,
    pub big_b: f64,
    pub c_breve: f64,
    pub sigma: f64,
    pub sigma1: f64,
}

/// Opaque handle to the zeta example with fixed `(beta1, beta2, beta0)`.
pub struct LcbSpecialCase(SpecialCaseParams);

/// Opaque handle to a stationary distribution on levels `0..=n`.
pub struct LcbStationary(ProbabilityVector);

/// Builds the example. Requires `2 < beta1 < beta2`, `1 < beta0 < beta1 - 1` and a positive
/// `kappa`.
///
/// # Safety
/// `out` must be null or valid for writes. On success `*out` owns a handle to release with
/// [`lcb_special_case_free`].
#[no_mangle]
pub unsafe extern "C" fn lcb_special_case_new(
    beta1: f64,
    beta2: f64,
    beta0: f64,
    out: *mut *mut LcbSpecialCase,
) -> LcbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let p = closed_form_params(beta1, beta2, beta0).map_err(lift)?;
        *out = Box::into_raw(Box::new(LcbSpecialCase(p)));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`lcb_special_case_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lcb_special_case_free(h: *mut LcbSpecialCase) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `h` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lcb_special_case_constants(
    h: *const LcbSpecialCase,
    out: *mut LcbSpecialConstants,
) -> LcbStatus {
    guard(|| {
        let (Some(h), false) = (h.as_ref(), out.is_null()) else {
            return Err(null("handle or out"));
        };
        let p = &h.0;
        *out = LcbSpecialConstants {
            kappa: p.kappa,
            epsilon: p.epsilon,
            delta0: p.delta0,
            x0: p.x0,
            rho: p.rho,
            c1: p.c1,
            c2: p.c2,
            k: p.k as u64,
            b: p.b,
            big_b: p.big_b,
            c_breve: p.c_breve,
            sigma: p.sigma,
            sigma1: p.sigma1,
        };
        Ok(())
    })
}

/// Closed-form bound at integer-valued `(m, n)`.
///
/// # Safety
/// `h` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lcb_special_case_bound(
    h: *const LcbSpecialCase,
    m: f64,
    n: f64,
    out: *mut LcbBound,
) -> LcbStatus {
    guard(|| {
        let (Some(h), false) = (h.as_ref(), out.is_null()) else {
            return Err(null("handle or out"));
        };
        *out = bound_special(&h.0, m, n).map_err(lift)?.into();
        Ok(())
    })
}

/// `(m0, n0)` with bound at most `tolerance`, which must lie in `(0, 2)`.
///
/// # Safety
/// `h` must be a live handle; `m0` and `n0` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lcb_special_case_plan(
    h: *const LcbSpecialCase,
    tolerance: f64,
    m0: *mut f64,
    n0: *mut f64,
) -> LcbStatus {
    guard(|| {
        let (Some(h), false, false) = (h.as_ref(), m0.is_null(), n0.is_null()) else {
            return Err(null("handle, m0 or n0"));
        };
        let (m, n) = plan_tolerance_special(&h.0, tolerance).map_err(lift)?;
        *m0 = m;
        *n0 = n;
        Ok(())
    })
}

/// Stationary distribution of the truncation at level `n` of `P`, or of `P_N` when
/// `fold > 0`.
///
/// # Safety
/// `h` must be a live handle and `out` valid for writes. On success `*out` owns a handle to
/// release with [`lcb_stationary_free`].
#[no_mangle]
pub unsafe extern "C" fn lcb_special_case_stationary(
    h: *const LcbSpecialCase,
    n: usize,
    fold: usize,
    out: *mut *mut LcbStationary,
) -> LcbStatus {
    guard(|| {
        let (Some(h), false) = (h.as_ref(), out.is_null()) else {
            return Err(null("handle or out"));
        };
        *out = ptr::null_mut();
        let chain = h.0.chain();
        let m = if fold == 0 {
            lc_block_augment(&Assembled(chain), n)
        } else {
            let g = modified_kernel(chain, fold).map_err(lift)?;
            lc_block_augment(&Assembled(g), n)
        }
        .map_err(lift)?;
        let pi = stationary_gth(&m).map_err(lift)?;
        *out = Box::into_raw(Box::new(LcbStationary(pi)));
        Ok(())
    })
}

/// Stationary distribution of a dense row-major stochastic matrix with `phases` states per
/// level.
///
/// # Safety
/// `data` must point to `states * states` readable doubles and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lcb_stationary_from_dense(
    states: usize,
    phases: usize,
    data: *const f64,
    out: *mut *mut LcbStationary,
) -> LcbStatus {
    guard(|| {
        if data.is_null() || out.is_null() {
            return Err(null("data or out"));
        }
        *out = ptr::null_mut();
        let len = states.checked_mul(states).ok_or((LcbStatus::InvalidArgument, "states overflows".into()))?;
        let v = std::slice::from_raw_parts(data, len).to_vec();
        let m = FiniteStochasticMatrix::dense_with_phases(states, phases, v).map_err(lift)?;
        let pi = stationary_gth(&m).map_err(lift)?;
        *out = Box::into_raw(Box::new(LcbStationary(pi)));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lcb_stationary_free(h: *mut LcbStationary) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of entries (levels times phases); 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lcb_stationary_len(h: *const LcbStationary) -> usize {
    h.as_ref().map_or(0, |h| h.0.as_slice().len())
}

/// Phases per level; 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lcb_stationary_phases(h: *const LcbStationary) -> usize {
    h.as_ref().map_or(0, |h| h.0.phases())
}

/// Copies the entries, level-major, into `buf` of length `len`.
///
/// # Safety
/// `h` must be a live handle and `buf` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lcb_stationary_copy(h: *const LcbStationary, buf: *mut f64, len: usize) -> LcbStatus {
    guard(|| {
        let (Some(h), false) = (h.as_ref(), buf.is_null()) else {
            return Err(null("handle or buf"));
        };
        let src = h.0.as_slice();
        if len < src.len() {
            return Err((LcbStatus::BufferTooSmall, format!("need {} doubles, got {len}", src.len())));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        Ok(())
    })
}

/// Total variation distance, the shorter vector padded with zeros.
///
/// # Safety
/// `a` and `b` must be live handles and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lcb_total_variation(
    a: *const LcbStationary,
    b: *const LcbStationary,
    out: *mut f64,
) -> LcbStatus {
    guard(|| {
        let (Some(a), Some(b), false) = (a.as_ref(), b.as_ref(), out.is_null()) else {
            return Err(null("a, b or out"));
        };
        *out = total_variation(&a.0, &b.0).map_err(lift)?;
        Ok(())
    })
}

/// Bound `8 v(1, varpi) / r_phi(m - 1) + 2 m b sum_i 1 / phi(v(n, i))` with
/// `phi(t) = kappa beta0 t^{1 - 1/beta0}`.
///
/// # Safety
/// `phi_v_n` must point to `phases` readable doubles and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lcb_bound_main_b(
    m: f64,
    n: f64,
    v1_varpi: f64,
    kappa: f64,
    beta0: f64,
    b: f64,
    phi_v_n: *const f64,
    phases: usize,
    out: *mut LcbBound,
) -> LcbStatus {
    guard(|| {
        if phi_v_n.is_null() || out.is_null() {
            return Err(null("phi_v_n or out"));
        }
        let phi = PowerPhi::new(kappa, beta0).map_err(lift)?;
        let pv = std::slice::from_raw_parts(phi_v_n, phases);
        *out = bound_main_b(m, n, v1_varpi, &phi, b, pv).map_err(lift)?.into();
        Ok(())
    })
}
