//! Subgeometric drift: the rate function `phi`, `H_phi(x) = int_1^x dy / phi(y)`, its inverse,
//! `r_phi = phi o H_phi^{-1}`, the deflation `c_{phi,B}`, and numerical drift verification.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::blockmatrix::{is_block_increasing, BlockKernel, BlockVector};
use crate::error::{domain, invalid, Error, Result};

/// Absolute tolerance of the quadrature behind `H_phi`.
pub const H_TOL: f64 = 1e-10;
/// Largest number of subintervals the adaptive quadrature may create.
pub const MAX_SUBDIVISIONS: usize = 1_000_000;
/// Slack below which a drift inequality counts as violated.
pub const DRIFT_SLACK_TOL: f64 = 1e-10;

/// A nondecreasing concave rate function on `[1, inf)` with derivative tending to zero.
pub trait Phi: Send + Sync {
    fn phi(&self, t: f64) -> f64;
    fn phi_prime(&self, t: f64) -> f64;

    fn closed_form_h(&self, _x: f64) -> Option<f64> {
        None
    }
    fn closed_form_h_inverse(&self, _y: f64) -> Option<f64> {
        None
    }
    fn closed_form_r(&self, _x: f64) -> Option<f64> {
        None
    }
}

/// `phi(t) = kappa * beta0 * t^{1 - 1/beta0}`, the rate of the polynomial Lyapunov family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPhi {
    pub kappa: f64,
    pub beta0: f64,
}

impl PowerPhi {
    pub fn new(kappa: f64, beta0: f64) -> Result<Self> {
        if !(kappa > 0.0) || !(beta0 > 1.0) {
            return Err(domain(format!("PowerPhi needs kappa > 0 and beta0 > 1 (got {kappa}, {beta0})")));
        }
        Ok(PowerPhi { kappa, beta0 })
    }
}

impl Phi for PowerPhi {
    fn phi(&self, t: f64) -> f64 {
        self.kappa * self.beta0 * t.powf(1.0 - 1.0 / self.beta0)
    }
    fn phi_prime(&self, t: f64) -> f64 {
        self.kappa * (self.beta0 - 1.0) * t.powf(-1.0 / self.beta0)
    }
    fn closed_form_h(&self, x: f64) -> Option<f64> {
        Some((x.powf(1.0 / self.beta0) - 1.0) / self.kappa)
    }
    fn closed_form_h_inverse(&self, y: f64) -> Option<f64> {
        Some((self.kappa * y + 1.0).powf(self.beta0))
    }
    fn closed_form_r(&self, x: f64) -> Option<f64> {
        Some(self.kappa * self.beta0 * (self.kappa * x + 1.0).powf(self.beta0 - 1.0))
    }
}

/// Constant rate `phi = c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPhi(pub f64);

impl Phi for ConstantPhi {
    fn phi(&self, _t: f64) -> f64 {
        self.0
    }
    fn phi_prime(&self, _t: f64) -> f64 {
        0.0
    }
}

/// Hides the closed forms of another rate so that the numerical paths are exercised.
pub struct NumericOnly<P>(pub P);

impl<P: Phi> Phi for NumericOnly<P> {
    fn phi(&self, t: f64) -> f64 {
        self.0.phi(t)
    }
    fn phi_prime(&self, t: f64) -> f64 {
        self.0.phi_prime(t)
    }
}

impl<T: Phi + ?Sized> Phi for Arc<T> {
    fn phi(&self, t: f64) -> f64 {
        (**self).phi(t)
    }
    fn phi_prime(&self, t: f64) -> f64 {
        (**self).phi_prime(t)
    }
    fn closed_form_h(&self, x: f64) -> Option<f64> {
        (**self).closed_form_h(x)
    }
    fn closed_form_h_inverse(&self, y: f64) -> Option<f64> {
        (**self).closed_form_h_inverse(y)
    }
    fn closed_form_r(&self, x: f64) -> Option<f64> {
        (**self).closed_form_r(x)
    }
}

/// Sampled checks of monotonicity, concavity and vanishing derivative.
pub fn check_phi<P: Phi + ?Sized>(phi: &P) -> Result<()> {
    let grid: Vec<f64> = (0..=120).map(|i| 10f64.powf(i as f64 * 0.05)).collect();
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (phi.phi(a), phi.phi(b));
        if !(fa > 0.0) || !fa.is_finite() {
            return Err(Error::AssumptionUnverified(format!("phi({a}) = {fa} is not positive")));
        }
        if fa > fb + 1e-12 * fb.abs().max(1.0) {
            return Err(Error::AssumptionUnverified(format!("phi decreases on [{a}, {b}]")));
        }
        let mid = phi.phi(0.5 * (a + b));
        if mid < 0.5 * (fa + fb) - 1e-10 * fb.abs().max(1.0) {
            return Err(Error::AssumptionUnverified(format!("phi is not concave on [{a}, {b}]")));
        }
        if phi.phi_prime(b) > phi.phi_prime(a) + 1e-12 {
            return Err(Error::AssumptionUnverified(format!("phi' increases on [{a}, {b}]")));
        }
    }
    let (d1, dbig) = (phi.phi_prime(1.0), phi.phi_prime(1e6));
    if !(dbig < d1) && d1 != 0.0 {
        return Err(Error::AssumptionUnverified("phi' does not decay".into()));
    }
    Ok(())
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    struct Seg {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    }
    let simpson = |a: f64, b: f64, fa: f64, fm: f64, fb: f64| (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let mut stack = vec![Seg { a, b, fa, fm, fb, whole: simpson(a, b, fa, fm, fb), tol, depth: 0 }];
    let mut total = 0.0;
    let mut pieces = 1usize;
    while let Some(s) = stack.pop() {
        let m = 0.5 * (s.a + s.b);
        let (lm, rm) = (0.5 * (s.a + m), 0.5 * (m + s.b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(s.a, m, s.fa, flm, s.fm);
        let right = simpson(m, s.b, s.fm, frm, s.fb);
        let delta = left + right - s.whole;
        if delta.abs() <= 15.0 * s.tol || s.depth >= 60 || (m - s.a).abs() <= f64::EPSILON * m.abs() {
            total += left + right + delta / 15.0;
            continue;
        }
        pieces += 1;
        if pieces > MAX_SUBDIVISIONS {
            return Err(Error::Resource("quadrature exceeded the subdivision cap".into()));
        }
        let t = 0.5 * s.tol;
        stack.push(Seg { a: s.a, b: m, fa: s.fa, fm: flm, fb: s.fm, whole: left, tol: t, depth: s.depth + 1 });
        stack.push(Seg { a: m, b: s.b, fa: s.fm, fm: frm, fb: s.fb, whole: right, tol: t, depth: s.depth + 1 });
    }
    Ok(total)
}

/// `int_a^b dy / phi(y)` for `1 <= a <= b`, integrated in `u = ln y`.
fn h_segment<P: Phi + ?Sized>(phi: &P, a: f64, b: f64) -> Result<f64> {
    let g = |u: f64| {
        let y = u.exp();
        y / phi.phi(y)
    };
    let (ua, ub) = (a.ln(), b.ln());
    // The tolerance is relative once the integral is large, which keeps the cost bounded.
    let coarse = (ub - ua) * g(0.5 * (ua + ub));
    let tol = H_TOL.max(1e-14 * coarse.abs());
    adaptive_simpson(&g, ua, ub, tol)
}

/// `H_phi(x)` by quadrature, ignoring any closed form.
pub fn h_phi_numeric<P: Phi + ?Sized>(phi: &P, x: f64) -> Result<f64> {
    if !(x >= 1.0) || !x.is_finite() {
        return Err(domain(format!("H_phi requires x >= 1, got {x}")));
    }
    h_segment(phi, 1.0, x)
}

/// `H_phi(x) = int_1^x dy / phi(y)`.
pub fn h_phi<P: Phi + ?Sized>(phi: &P, x: f64) -> Result<f64> {
    if !(x >= 1.0) || x.is_nan() {
        return Err(domain(format!("H_phi requires x >= 1, got {x}")));
    }
    match phi.closed_form_h(x) {
        Some(h) => Ok(h),
        None => h_phi_numeric(phi, x),
    }
}

/// `H_phi^{-1}(y)` by geometric bracketing from `[1, 2]` and bisection, ignoring closed forms.
pub fn h_phi_inverse_numeric<P: Phi + ?Sized>(phi: &P, y: f64) -> Result<f64> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(domain(format!("H_phi^-1 requires y >= 0, got {y}")));
    }
    if y == 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut h_lo) = (1.0f64, 0.0f64);
    let mut hi = 2.0f64;
    let mut h_hi = h_segment(phi, lo, hi)?;
    while h_hi < y {
        lo = hi;
        h_lo = h_hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::SearchExhausted(format!("H_phi stays below {y}")));
        }
        h_hi = h_lo + h_segment(phi, lo, hi)?;
    }
    if (h_hi - y).abs() <= H_TOL {
        return Ok(hi);
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let h_mid = h_lo + h_segment(phi, lo, mid)?;
        if (h_mid - y).abs() <= H_TOL {
            return Ok(mid);
        }
        if h_mid < y {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
        }
    }
}

/// `H_phi^{-1}(y)`, the inverse of `H_phi` on `[0, inf)`.
pub fn h_phi_inverse<P: Phi + ?Sized>(phi: &P, y: f64) -> Result<f64> {
    if !(y >= 0.0) || y.is_nan() {
        return Err(domain(format!("H_phi^-1 requires y >= 0, got {y}")));
    }
    match phi.closed_form_h_inverse(y) {
        Some(x) => Ok(x),
        None => h_phi_inverse_numeric(phi, y),
    }
}

/// `r_phi(x) = phi(H_phi^{-1}(x))` for `x >= 0` and `0` for `x < 0`.
pub fn r_phi<P: Phi + ?Sized>(phi: &P, x: f64) -> Result<f64> {
    if x < 0.0 {
        return Ok(0.0);
    }
    match phi.closed_form_r(x) {
        Some(r) => Ok(r),
        None => Ok(phi.phi(h_phi_inverse(phi, x)?)),
    }
}

/// `r_phi` through quadrature and bisection only.
pub fn r_phi_numeric<P: Phi + ?Sized>(phi: &P, x: f64) -> Result<f64> {
    if x < 0.0 {
        return Ok(0.0);
    }
    Ok(phi.phi(h_phi_inverse_numeric(phi, x)?))
}

/// Slope `phi(1) / phi(B + 1)` of `c_{phi,B}`.
pub fn c_phi_b_slope<P: Phi + ?Sized>(phi: &P, big_b: f64) -> Result<f64> {
    if !(big_b > 0.0) {
        return Err(domain(format!("c_phi_B requires B > 0, got {big_b}")));
    }
    Ok(phi.phi(1.0) / phi.phi(big_b + 1.0))
}

/// `c_{phi,B}(x) = phi(1) / phi(B + 1) * x`.
pub fn c_phi_b<P: Phi + ?Sized>(phi: &P, big_b: f64, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(domain(format!("c_phi_B requires x >= 0, got {x}")));
    }
    Ok(c_phi_b_slope(phi, big_b)? * x)
}

/// Hypotheses of the drift condition `P^M v <= v - phi(v) + b 1_K`.
#[derive(Clone)]
pub struct DriftCertificate {
    pub v: BlockVector,
    pub phi: Arc<dyn Phi>,
    pub b: f64,
    pub k: usize,
    pub m: usize,
    pub big_b: Option<f64>,
}

impl std::fmt::Debug for DriftCertificate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DriftCertificate")
            .field("b", &self.b)
            .field("K", &self.k)
            .field("M", &self.m)
            .field("B", &self.big_b)
            .finish_non_exhaustive()
    }
}

/// Levels on which `v >= 1` and block-increasingness are sampled when a certificate is built.
const CERT_SAMPLE_LEVELS: usize = 2048;

impl DriftCertificate {
    pub fn new(
        v: BlockVector,
        phi: Arc<dyn Phi>,
        b: f64,
        k: usize,
        m: usize,
        big_b: Option<f64>,
    ) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(invalid(format!("b must be positive and finite, got {b}")));
        }
        if m == 0 {
            return Err(invalid("M must be at least 1"));
        }
        if let Some(bb) = big_b {
            if !(bb > 0.0) {
                return Err(invalid(format!("B must be positive, got {bb}")));
            }
        }
        for kk in 0..=CERT_SAMPLE_LEVELS {
            for i in 0..v.phases() {
                if !(v.value(kk, i) >= 1.0) {
                    return Err(invalid(format!("v({kk}, {i}) = {} < 1", v.value(kk, i))));
                }
            }
        }
        if !is_block_increasing(&v, CERT_SAMPLE_LEVELS) {
            return Err(invalid("v is not block increasing"));
        }
        Ok(DriftCertificate { v, phi, b, k, m, big_b })
    }
}

/// Upper bound on `sum_{l > L} [P^M](k; l) v(l)` per phase, given `(k, L)`.
pub type TailBound<'a> = dyn Fn(usize, usize) -> Result<DVector<f64>> + Sync + 'a;

/// Per-level slack of a drift inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    /// `slack[k][i] = v(k,i) - phi(v(k,i)) + b 1{k <= K} - (P^M v)(k,i)` (upper estimate of `P^M v`).
    pub slack: Vec<Vec<f64>>,
    pub worst_slack: f64,
    pub worst_level: usize,
    pub passed: bool,
}

/// Number of levels above `k` summed explicitly before the tail bound takes over.
const EXPLICIT_WINDOW: usize = 16;

/// Evaluates the drift inequality on levels `0..=horizon`.
///
/// For `M = 1` the kernel may have unbounded upward reach, in which case `tail_bound` must be
/// supplied. For `M > 1` the kernel must have finite upward reach and `P^M` rows are formed
/// exactly by propagation.
pub fn verify_drift<K: BlockKernel + ?Sized>(
    p: &K,
    cert: &DriftCertificate,
    horizon: usize,
    tail_bound: Option<&TailBound<'_>>,
) -> Result<DriftReport> {
    let d = p.phases();
    if cert.v.phases() != d {
        return Err(invalid("certificate and kernel have different phase counts"));
    }
    let mut slack = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        let pv = expected_v(p, &cert.v, k, cert.m, tail_bound)?;
        let row: Vec<f64> = (0..d)
            .map(|i| {
                let vk = cert.v.value(k, i);
                let bump = if k <= cert.k { cert.b } else { 0.0 };
                vk - cert.phi.phi(vk) + bump - pv[i]
            })
            .collect();
        slack.push(row);
    }
    let mut worst = (f64::INFINITY, 0);
    for (k, row) in slack.iter().enumerate() {
        for &s in row {
            if s < worst.0 {
                worst = (s, k);
            }
        }
    }
    Ok(DriftReport { slack, worst_slack: worst.0, worst_level: worst.1, passed: worst.0 >= -DRIFT_SLACK_TOL })
}

/// Upper estimate of `(P^M v)(k, .)`; exact whenever the upward reach is finite.
pub fn expected_v<K: BlockKernel + ?Sized>(
    p: &K,
    v: &BlockVector,
    k: usize,
    m: usize,
    tail_bound: Option<&TailBound<'_>>,
) -> Result<DVector<f64>> {
    if m == 1 {
        one_step_pv(p, v, k, tail_bound)
    } else {
        multi_step_pv(p, v, k, m)
    }
}

fn one_step_pv<K: BlockKernel + ?Sized>(
    p: &K,
    v: &BlockVector,
    k: usize,
    tail_bound: Option<&TailBound<'_>>,
) -> Result<DVector<f64>> {
    let d = p.phases();
    let first = p.max_down_jump().map_or(0, |dn| k.saturating_sub(dn));
    let (last, tail) = match p.max_up_jump() {
        Some(u) => (k + u, None),
        None => {
            let Some(tb) = tail_bound else {
                return Err(Error::Contract(
                    "kernel has unbounded upward reach and no tail bound was supplied".into(),
                ));
            };
            let last = k + EXPLICIT_WINDOW;
            (last, Some(tb(k, last)?))
        }
    };
    let mut acc = DVector::zeros(d);
    for l in first..=last {
        acc += p.block(k, l) * v.level(l);
    }
    if let Some(t) = tail {
        acc += t;
    }
    Ok(acc)
}

/// `(P^M v)(k, .)` for a kernel with finite upward reach.
fn multi_step_pv<K: BlockKernel + ?Sized>(
    p: &K,
    v: &BlockVector,
    k: usize,
    m: usize,
) -> Result<DVector<f64>> {
    let Some(u) = p.max_up_jump() else {
        return Err(Error::Contract(
            "M > 1 requires a kernel with finite upward reach".into(),
        ));
    };
    let d = p.phases();
    let reach = k + m * u;
    // rows[l] holds the d x d block [P^t](k; l).
    let mut rows: Vec<DMatrix<f64>> = vec![DMatrix::zeros(d, d); reach + 1];
    rows[k] = DMatrix::identity(d, d);
    let mut top = k;
    for _ in 0..m {
        let mut next: Vec<DMatrix<f64>> = vec![DMatrix::zeros(d, d); reach + 1];
        for (j, r) in rows.iter().enumerate().take(top + 1) {
            if r.iter().all(|&x| x == 0.0) {
                continue;
            }
            let first = p.max_down_jump().map_or(0, |dn| j.saturating_sub(dn));
            for (l, slot) in next.iter_mut().enumerate().take(j + u + 1).skip(first) {
                *slot += r * p.block(j, l);
            }
        }
        rows = next;
        top += u;
    }
    let mut acc = DVector::zeros(d);
    for (l, r) in rows.iter().enumerate() {
        acc += r * v.level(l);
    }
    Ok(acc)
}
