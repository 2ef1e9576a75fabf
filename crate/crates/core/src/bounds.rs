//! Truncation error bounds and the search for `(m, n)` meeting a tolerance.
//!
//! Every bound is the sum of a mixing term `8 v(1, varpi) / r_phi(m - 1)` (possibly deflated by
//! `c_{phi,B}`) and a truncation term proportional to `m`. Counts `m` and `n` are carried as
//! integer-valued `f64` because tolerance plans can exceed `u64`.

use serde::Serialize;

use crate::drift::{c_phi_b_slope, r_phi, Phi};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    MainA,
    MainB,
    Extended,
    ExtendedK0,
    Gig1,
    Gig1K0,
    Special,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::MainA => "main-a",
            Variant::MainB => "main-b",
            Variant::Extended => "extended",
            Variant::ExtendedK0 => "extended-K0",
            Variant::Gig1 => "gig1",
            Variant::Gig1K0 => "gig1-K0",
            Variant::Special => "special",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub m: f64,
    pub n: f64,
    pub bound_value: f64,
    pub term_mixing: f64,
    pub term_truncation: f64,
    pub variant: Variant,
}

impl BoundReport {
    pub fn new(m: f64, n: f64, term_mixing: f64, term_truncation: f64, variant: Variant) -> Self {
        BoundReport {
            m,
            n,
            bound_value: term_mixing + term_truncation,
            term_mixing,
            term_truncation,
            variant,
        }
    }
}

/// Checks that `x` is a positive integer value.
pub fn check_count(name: &str, x: f64) -> Result<()> {
    if !(x >= 1.0) || x.fract() != 0.0 || !x.is_finite() {
        return Err(invalid(format!("{name} must be a positive integer, got {x}")));
    }
    Ok(())
}

fn check_phi_v(phi_v_n: &[f64]) -> Result<f64> {
    if phi_v_n.is_empty() {
        return Err(invalid("phi(v(n, .)) must have one entry per phase"));
    }
    let mut s = 0.0;
    for &x in phi_v_n {
        if !(x > 0.0) {
            return Err(invalid(format!("phi(v(n, i)) must be positive, got {x}")));
        }
        s += 1.0 / x;
    }
    Ok(s)
}

/// `8 v(1, varpi) / r_phi(m - 1) + 2 m sum_i trunc(pi)_n(n, i)`.
pub fn bound_main_a<P: Phi + ?Sized>(
    m: f64,
    n: f64,
    v1_varpi: f64,
    phi: &P,
    boundary_mass: f64,
) -> Result<BoundReport> {
    check_count("m", m)?;
    check_count("n", n)?;
    if !(v1_varpi >= 1.0) {
        return Err(invalid(format!("v(1, varpi) must be >= 1, got {v1_varpi}")));
    }
    if !(0.0..=1.0).contains(&boundary_mass) {
        return Err(invalid(format!("boundary mass must lie in [0, 1], got {boundary_mass}")));
    }
    let mixing = 8.0 * v1_varpi / r_phi(phi, m - 1.0)?;
    Ok(BoundReport::new(m, n, mixing, 2.0 * m * boundary_mass, Variant::MainA))
}

/// `8 v(1, varpi) / r_phi(m - 1) + 2 m b sum_i 1 / phi(v(n, i))`.
pub fn bound_main_b<P: Phi + ?Sized>(
    m: f64,
    n: f64,
    v1_varpi: f64,
    phi: &P,
    b: f64,
    phi_v_n: &[f64],
) -> Result<BoundReport> {
    check_count("m", m)?;
    check_count("n", n)?;
    if !(v1_varpi >= 1.0) {
        return Err(invalid(format!("v(1, varpi) must be >= 1, got {v1_varpi}")));
    }
    if !(b > 0.0) {
        return Err(invalid(format!("b must be positive, got {b}")));
    }
    let inv = check_phi_v(phi_v_n)?;
    let mixing = 8.0 * v1_varpi / r_phi(phi, m - 1.0)?;
    Ok(BoundReport::new(m, n, mixing, 2.0 * m * b * inv, Variant::MainB))
}

/// Inputs of the bound under the `M`-step drift condition with a finite exceptional set.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedInputs {
    pub m: f64,
    pub n: f64,
    /// Number of steps `M` in the drift condition.
    pub steps: u64,
    pub b: f64,
    /// `B`, required when `K > 0`.
    pub big_b: Option<f64>,
    /// Exceptional levels `0..=K`.
    pub k: u64,
    pub v1_varpi: f64,
    /// `phi(v(n, i))` for every phase.
    pub phi_v_n: Vec<f64>,
}

/// Bound under `P^M v <= v - phi(v) + b 1_K`.
///
/// For `K = 0` the mixing term is `8 v(1, varpi) / r_phi(m - 1)`. For `K > 0` it is
/// `8 / c(1) * (v(1, varpi) + B) / r_phi(c(m - 1))` with `c = c_{phi,B}`. The truncation term
/// is `2 m M b sum_i 1 / phi(v(n, i))` in both cases.
pub fn bound_extended<P: Phi + ?Sized>(inp: &ExtendedInputs, phi: &P) -> Result<BoundReport> {
    check_count("m", inp.m)?;
    check_count("n", inp.n)?;
    if inp.steps == 0 {
        return Err(invalid("M must be at least 1"));
    }
    if !(inp.v1_varpi >= 1.0) {
        return Err(invalid(format!("v(1, varpi) must be >= 1, got {}", inp.v1_varpi)));
    }
    if !(inp.b > 0.0) {
        return Err(invalid(format!("b must be positive, got {}", inp.b)));
    }
    let inv = check_phi_v(&inp.phi_v_n)?;
    let trunc = 2.0 * inp.m * inp.steps as f64 * inp.b * inv;
    if inp.k == 0 {
        let mixing = 8.0 * inp.v1_varpi / r_phi(phi, inp.m - 1.0)?;
        return Ok(BoundReport::new(inp.m, inp.n, mixing, trunc, Variant::ExtendedK0));
    }
    let Some(big_b) = inp.big_b else {
        return Err(Error::Contract("K > 0 requires B".into()));
    };
    let c1 = c_phi_b_slope(phi, big_b)?;
    let mixing = 8.0 / c1 * (inp.v1_varpi + big_b) / r_phi(phi, c1 * (inp.m - 1.0))?;
    Ok(BoundReport::new(inp.m, inp.n, mixing, trunc, Variant::Extended))
}

/// Exact minimisation over `m = 1..=m_max` by scanning; ties go to the smallest `m`.
pub fn minimize_over_m(
    bound_fn: impl Fn(u64) -> Result<f64>,
    m_max: u64,
) -> Result<(u64, f64)> {
    if m_max < 1 {
        return Err(invalid("m_max must be at least 1"));
    }
    let mut best = (1, bound_fn(1)?);
    for m in 2..=m_max {
        let v = bound_fn(m)?;
        if v < best.1 {
            best = (m, v);
        }
    }
    Ok(best)
}

/// Next representable integer above `m`.
fn next_count(m: f64) -> f64 {
    let step = (m * f64::EPSILON).max(1.0);
    let next = m + step;
    if next > m {
        next
    } else {
        m + 2.0 * step
    }
}

/// Minimisation over integer-valued `m` in `[1, m_max]` for unimodal `bound_fn`.
///
/// Bisects on the sign of the forward difference, so it needs `O(log m_max)` evaluations.
/// Suitable for bounds that are a convex decreasing mixing term plus a term linear in `m`.
/// Above 2^53 only representable integers are visited.
pub fn minimize_unimodal_over_m(
    bound_fn: impl Fn(f64) -> Result<f64>,
    m_max: f64,
) -> Result<(f64, f64)> {
    if !(m_max >= 1.0) {
        return Err(invalid("m_max must be at least 1"));
    }
    let m_max = m_max.floor();
    let rising = |m: f64| -> Result<bool> {
        let next = next_count(m);
        if next > m_max {
            return Ok(true);
        }
        Ok(bound_fn(next)? >= bound_fn(m)?)
    };
    // Smallest m whose forward difference is nonnegative.
    let (mut lo, mut hi) = (1.0f64, m_max);
    if rising(lo)? {
        return Ok((1.0, bound_fn(1.0)?));
    }
    while next_count(lo) < hi {
        let mid = (lo + 0.5 * (hi - lo)).floor();
        let mid = if mid <= lo { next_count(lo) } else { mid };
        if mid >= hi {
            break;
        }
        if rising(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((hi, bound_fn(hi)?))
}

/// Smallest integer-valued `x` in `[1, x_max]` with `pred(x)`, for a predicate that is monotone
/// (false then true).
fn first_true(pred: &dyn Fn(f64) -> Result<bool>, x_max: f64) -> Result<Option<f64>> {
    if pred(1.0)? {
        return Ok(Some(1.0));
    }
    let mut lo = 1.0f64;
    let mut hi = 2.0f64;
    loop {
        if hi >= x_max {
            hi = x_max.floor();
            if !pred(hi)? {
                return Ok(None);
            }
            break;
        }
        if pred(hi)? {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    while next_count(lo) < hi {
        let mid = (lo + 0.5 * (hi - lo)).floor();
        let mid = if mid <= lo { next_count(lo) } else { mid };
        if mid >= hi {
            break;
        }
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Smallest `m0` with `mixing(m0) <= E / 2`, then smallest `n0 <= n_max` with
/// `truncation(m0, n0) <= E / 2`.
pub fn tolerance_plan(
    target: f64,
    mixing_fn: impl Fn(f64) -> Result<f64>,
    truncation_fn: impl Fn(f64, f64) -> Result<f64>,
    n_max: f64,
) -> Result<(f64, f64)> {
    if !(target > 0.0 && target < 2.0) {
        return Err(invalid(format!("tolerance must lie in (0, 2), got {target}")));
    }
    if !(n_max >= 1.0) {
        return Err(invalid("n_max must be at least 1"));
    }
    let half = 0.5 * target;
    let m_pred = |m: f64| Ok(mixing_fn(m)? <= half);
    let m0 = first_true(&m_pred, f64::MAX)?.ok_or_else(|| Error::ToleranceUnreachable {
        residual: mixing_fn(f64::MAX).unwrap_or(f64::INFINITY),
        detail: "mixing term never falls below E/2".into(),
    })?;
    let n_pred = |n: f64| Ok(truncation_fn(m0, n)? <= half);
    match first_true(&n_pred, n_max)? {
        Some(n0) => Ok((m0, n0)),
        None => Err(Error::ToleranceUnreachable {
            residual: truncation_fn(m0, n_max.floor())? - half,
            detail: format!("truncation term at n_max = {n_max:e} still exceeds E/2"),
        }),
    }
}
