//! From increments and a choice of `V` to a drift certificate for `P_N^M`.

use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use super::vfamily::VFamily;
use super::{
    choose_kappa_epsilon, choose_m0, choose_n, compute_big_b, convolve_power, kappa_for_epsilon,
    convolution_moments, mean_drift_sigma, modified_kernel, validate_kernel, Assembled, GiG1Kernel,
    IncrementTable, PowerLaw,
};
use crate::blockmatrix::BlockVector;
use crate::bounds::{bound_extended, BoundReport, ExtendedInputs, Variant};
use crate::drift::{check_phi, expected_v, verify_drift, DriftCertificate, DriftReport, TailBound};
use crate::error::{invalid, Error, Result};
use crate::special::zeta::weighted_power_tail;

/// Source of certified upper bounds on `sum_{l >= j} V(k + l) A_N^{*M}(l) e`.
#[derive(Debug, Clone)]
pub enum TailSource {
    /// Finitely supported increments, summed exactly.
    Table(IncrementTable),
    /// `M = 1` with a per-phase power-law majorant of `A(l) e`, `l >= 0`.
    PowerLaw(Vec<PowerLaw>),
}

impl TailSource {
    pub fn from_kernel<G: GiG1Kernel + ?Sized>(g: &G, m: usize, pos_tail_tol: f64) -> Result<Self> {
        if g.positive_reach().is_some() {
            return Ok(TailSource::Table(convolve_power(g, m, pos_tail_tol)?));
        }
        if m > 1 {
            return Err(Error::Contract(
                "M > 1 with unbounded positive increments is not supported".into(),
            ));
        }
        match g.power_law() {
            Some(pl) if pl.len() == g.phases() => Ok(TailSource::PowerLaw(pl)),
            _ => Err(Error::Contract(
                "unbounded positive increments need a power-law majorant for certified tails".into(),
            )),
        }
    }

    /// Upper bound on `sum_{l >= j} V(k + l) A^{*M}(l) e` per phase.
    pub fn weighted_tail(&self, vf: &VFamily, k: f64, j: usize) -> Result<DVector<f64>> {
        match self {
            TailSource::Table(t) => {
                let mut acc = DVector::zeros(t.d);
                let ones = DVector::from_element(t.d, 1.0);
                for l in (j as i64).max(t.min_k)..=t.max_k() {
                    acc += t.get(l) * &ones * vf.v(k + l as f64);
                }
                Ok(acc)
            }
            TailSource::PowerLaw(pl) => {
                let shift = k + vf.x0() - 1.0;
                let j1 = j as u64 + 1;
                let mut out = DVector::zeros(pl.len());
                for (i, law) in pl.iter().enumerate() {
                    // With l + 1 = jj the summand is c jj^{-beta} V(jj + shift).
                    out[i] = law.coef
                        * match *vf {
                            VFamily::Polynomial { beta0, .. } => {
                                let s = law.exponent - beta0;
                                if !(s > 1.0) {
                                    return Err(Error::Contract(format!(
                                        "sum of V(l) l^-{} diverges for beta0 = {beta0}",
                                        law.exponent
                                    )));
                                }
                                weighted_power_tail(j1, shift, beta0, s)?.upper()
                            }
                            VFamily::Logarithmic { gamma0, .. } => {
                                // log y <= log y_J (y / y_J)^{1/log y_J} for y >= y_J.
                                let y_j = j as f64 + k + vf.x0();
                                let lj = y_j.ln();
                                let p = 1.0 + gamma0 / lj;
                                let s = law.exponent - p;
                                if !(s > 1.0) {
                                    return Err(Error::Contract(format!(
                                        "logarithmic V against l^-{} has no summable majorant",
                                        law.exponent
                                    )));
                                }
                                lj.powf(gamma0)
                                    * y_j.powf(1.0 - p)
                                    * weighted_power_tail(j1, shift, p, s)?.upper()
                            }
                            VFamily::ModeratelyExponential { .. } => {
                                return Err(Error::Contract(
                                    "moderately exponential V is not summable against a power law".into(),
                                ))
                            }
                        };
                }
                Ok(out)
            }
        }
    }

    /// The [`TailBound`] of the one-step kernel `P_N` for `verify_drift`.
    ///
    /// Row 0 is bounded through row 1: block monotonicity gives `sum_{m >= l} B(m) <=
    /// sum_{m >= l - 1} A(m)`, and Abel summation with increasing `V` carries this to the
    /// weighted tails.
    pub fn one_step_bound<'a>(&'a self, vf: &'a VFamily) -> impl Fn(usize, usize) -> Result<DVector<f64>> + Sync + 'a {
        move |k, last| {
            if last < k {
                return Err(invalid("tail bound requires last >= k"));
            }
            if k == 0 {
                self.weighted_tail(vf, 1.0, last)
            } else {
                self.weighted_tail(vf, k as f64, last - k + 1)
            }
        }
    }
}

/// One sampled condition on `V`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VRoute {
    /// `V(k)/V'(k) sum_{l > delta k^{1-alpha}} V(l) A(l) e -> 0`.
    #[serde(rename = "A.1")]
    WeightedTail,
    /// `V(delta l)/V(l)` bounded and `sum V(l^{1/(1-alpha)}) A(l) e` finite.
    #[serde(rename = "A.2")]
    RatioSummable,
}

/// Outcome of [`check_v_assumption`]. Limits are checked on samples, not proved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VAssumptionReport {
    pub route: VRoute,
    pub conditions: Vec<ConditionCheck>,
    pub sample_certified: bool,
}

/// Levels of `A^{*M}` scanned by the sampled limit tests.
const ROW_SCAN_LEVELS: usize = 1 << 20;

/// `max_i [A^{*M}(l) e]_i` for `l` in `0..ROW_SCAN_LEVELS` (or the positive support).
fn row_masses<G: GiG1Kernel + ?Sized>(g: &G, m: usize, tol: f64) -> Result<(Vec<f64>, bool)> {
    let d = g.phases();
    if g.positive_reach().is_some() {
        let t = convolve_power(g, m, tol)?;
        let top = t.max_k().max(0) as usize;
        let rows = (0..=top)
            .map(|l| t.get(l as i64).row_iter().map(|r| r.sum()).fold(0.0, f64::max))
            .collect();
        return Ok((rows, true));
    }
    if m > 1 {
        return Err(Error::Contract("M > 1 with unbounded positive increments is not supported".into()));
    }
    let mut buf = vec![0.0; d * d];
    let rows = (0..ROW_SCAN_LEVELS)
        .map(|l| {
            g.write_a(l as i64, &mut buf);
            buf.chunks(d).map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max)
        })
        .collect();
    Ok((rows, false))
}

fn check(name: &str, passed: bool, detail: String) -> ConditionCheck {
    ConditionCheck { name: name.to_string(), passed, detail }
}

/// Conditions on `V` alone: monotone, convex, log-concave, (i) and (iii)-(v).
fn v_conditions(vf: &VFamily, light_tailed: bool) -> Vec<ConditionCheck> {
    let grid: Vec<f64> = std::iter::once(0.0).chain((-8..=80).map(|j| 2f64.powf(j as f64 * 0.5))).collect();
    let mut out = Vec::new();

    if light_tailed {
        out.push(check("(i)", true, "finitely supported increments; growth rate unrestricted".into()));
    } else {
        let g: Vec<f64> = (4..=40).map(|j| vf.ln_v(2f64.powi(j)) / 2f64.powi(j)).collect();
        let dec = g.windows(2).skip(g.len() / 2).all(|w| w[1] <= w[0]);
        let last = *g.last().unwrap();
        out.push(check("(i)", dec && last <= 0.01, format!("log V(x)/x = {last:e} at x = 2^40")));
    }

    let v0 = vf.v(0.0);
    out.push(check("V(0) >= 1", v0 >= 1.0, format!("V(0) = {v0}")));

    let ln_dv: Vec<f64> = grid.iter().map(|&x| vf.ln_dv(x)).collect();
    let inc = ln_dv.windows(2).all(|w| w[1] > w[0]);
    out.push(check(
        "(iii)",
        vf.dv(0.0) > 0.0 && inc,
        format!("V'(0) = {}, V' strictly increasing on samples", vf.dv(0.0)),
    ));

    let ratio: Vec<f64> = grid.iter().map(|&x| vf.d2v_over_dv(x)).collect();
    let noninc = ratio.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs());
    let convex = ratio.iter().all(|&r| r > 0.0);
    out.push(check("(iv)", noninc, "V''/V' nonincreasing on samples".into()));
    out.push(check("convex", convex, "V'' > 0 on samples".into()));

    let logc = grid.iter().all(|&x| vf.d2v_over_dv(x) <= (vf.ln_dv(x) - vf.ln_v(x)).exp() * (1.0 + 1e-12));
    out.push(check("log-concave", logc, "V''/V' <= V'/V on samples".into()));

    let (x, delta) = (1e6f64, 1e-3);
    let shifted = vf.ln_dv(x + delta * x.powf(1.0 - vf.alpha())) - vf.ln_dv(x);
    out.push(check(
        "(v)",
        shifted.exp() <= 1.01,
        format!("V'(x + delta x^(1-alpha))/V'(x) = {} at x = 1e6, delta = 1e-3", shifted.exp()),
    ));
    out
}

/// Route A.2 on samples.
fn route_ratio_summable(vf: &VFamily, rows: &[f64], light: bool) -> (bool, String) {
    let r: Vec<f64> = (4..=40).map(|j| {
        let l = 2f64.powi(j);
        vf.ln_v(2.0 * l) - vf.ln_v(l)
    }).collect();
    let incs: Vec<f64> = r.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let tail = &incs[incs.len() - 5..];
    let bounded = tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-15) && tail[4] <= 1e-3;
    if !bounded {
        return (false, format!("log V(2l)/V(l) still moving by {:e} at l = 2^40", tail[4]));
    }
    if light {
        return (true, "finite support".into());
    }
    let inv = 1.0 / (1.0 - vf.alpha());
    let levels = rows.len().trailing_zeros() as usize;
    let blocks: Vec<f64> = (0..levels)
        .map(|j| {
            ((1usize << j)..(1usize << (j + 1)))
                .filter(|&l| rows[l] > 0.0)
                .map(|l| (vf.ln_v((l as f64).powf(inv)) + rows[l].ln()).exp())
                .sum()
        })
        .collect();
    let n = blocks.len();
    if blocks[n - 4..].iter().all(|&b| b == 0.0) {
        return (true, "dyadic block sums vanish".into());
    }
    let geometric = blocks[n - 5..].windows(2).all(|w| w[1] <= 0.95 * w[0]);
    let (j0, j1) = (n / 2 + 4, n - 1);
    let decreasing = blocks[j0..].windows(2).all(|w| w[1] < w[0]);
    let exponent = -(blocks[j1] / blocks[j0]).ln() / (j1 as f64 / j0 as f64).ln();
    let passed = geometric || (decreasing && exponent > 1.05);
    (passed, format!("dyadic block sums end at {:e}, local power exponent {exponent:.3}", blocks[j1]))
}

/// Route A.1 on samples, for `delta` in {0.1, 1}.
fn route_weighted_tail(vf: &VFamily, rows: &[f64]) -> (bool, String) {
    // suffix[l] = sum_{m >= l} V(m) a_m within the scanned range.
    let mut suffix = vec![0.0; rows.len() + 1];
    for l in (0..rows.len()).rev() {
        let term = if rows[l] > 0.0 { (vf.ln_v(l as f64) + rows[l].ln()).exp() } else { 0.0 };
        suffix[l] = suffix[l + 1] + term;
    }
    let mut detail = String::new();
    for &delta in &[0.1, 1.0] {
        let mut q = Vec::new();
        for j in 4..64 {
            let k = 2f64.powi(j);
            let big_j = (delta * k.powf(1.0 - vf.alpha())).floor() as usize + 1;
            if big_j >= rows.len() / 2 {
                break;
            }
            let s = suffix[big_j];
            q.push(if s > 0.0 { vf.ln_v(k) - vf.ln_dv(k) + s.ln() } else { f64::NEG_INFINITY });
        }
        if q.len() < 6 {
            return (false, "too few samples".into());
        }
        let last = *q.last().unwrap();
        let peak = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tail_dec = q[q.len() - 4..].windows(2).all(|w| w[1] <= w[0]);
        let ok = last == f64::NEG_INFINITY || (tail_dec && last <= peak - 100f64.ln());
        detail = format!("delta = {delta}: log quantity {last:.3} at the last sample, peak {peak:.3}");
        if !ok {
            return (false, detail);
        }
    }
    (true, detail)
}

/// Sampled verification of the growth conditions on `V` against `A_N^{*M}`.
pub fn check_v_assumption<G: GiG1Kernel + ?Sized>(
    vf: &VFamily,
    g: &G,
    m: usize,
    pos_tail_tol: f64,
) -> Result<VAssumptionReport> {
    let (rows, light) = row_masses(g, m, pos_tail_tol)?;
    let mut conditions = v_conditions(vf, light);
    let failed: Vec<&ConditionCheck> = conditions.iter().filter(|c| !c.passed).collect();
    if !failed.is_empty() {
        return Err(Error::AssumptionUnverified(format!(
            "{} V fails {}: {}",
            vf.name(),
            failed[0].name,
            failed[0].detail
        )));
    }
    let (a1, d1) = if light { (true, "increments finitely supported".to_string()) } else { route_weighted_tail(vf, &rows) };
    let (a2, d2) = route_ratio_summable(vf, &rows, light);
    conditions.push(check("route A.1", a1, d1));
    conditions.push(check("route A.2", a2, d2.clone()));
    let route = if a2 {
        VRoute::RatioSummable
    } else if a1 {
        VRoute::WeightedTail
    } else {
        return Err(Error::AssumptionUnverified(format!(
            "neither sufficient condition holds on samples for {} V ({d2})",
            vf.name()
        )));
    };
    Ok(VAssumptionReport { route, conditions, sample_certified: true })
}

/// Trial values of `delta0` for families without a closed form.
const DELTA_TRIALS: usize = 31;

/// `(delta0, K0)` with `V'(k + delta0 k^{1-alpha}) <= (1 + eps) V'(k)` and
/// `V'(k - L) >= (1 - eps) V'(k)` on every integer `k` in `(K0, k_max]`, and `K0 >= L`.
pub fn choose_delta0_k0(vf: &VFamily, eps: f64, l: usize, k_max: usize) -> Result<(f64, usize)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    if l == 0 {
        return Err(invalid("L must be at least 1"));
    }
    let (up, down) = ((1.0 + eps).ln() + 1e-12, (1.0 - eps).ln() - 1e-12);
    let alpha = vf.alpha();
    let trials: Vec<f64> = match *vf {
        VFamily::Polynomial { beta0, .. } => vec![(1.0 + eps).powf(1.0 / (beta0 - 1.0)) - 1.0],
        _ => (0..DELTA_TRIALS).map(|i| 0.5f64.powi(i as i32)).collect(),
    };
    for delta in trials {
        let last_fail = (l + 1..=k_max)
            .rev()
            .find(|&k| {
                let kf = k as f64;
                let c1 = vf.ln_dv(kf + delta * kf.powf(1.0 - alpha)) - vf.ln_dv(kf) <= up;
                let c2 = vf.ln_dv(kf - l as f64) - vf.ln_dv(kf) >= down;
                !(c1 && c2)
            })
            .unwrap_or(0);
        let k0 = last_fail.max(l);
        if k0 <= k_max / 2 {
            return Ok((delta, k0));
        }
    }
    Err(Error::SearchExhausted(format!("no (delta0, K0) certified on levels up to {k_max}")))
}

/// How the choice of `K` is justified beyond the scanned levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KRoute {
    /// Every level up to the analytic threshold was checked; beyond it a closed-form majorant
    /// decays below `kappa`.
    AnalyticTail,
    /// The sum is empty beyond the scanned levels.
    EmptySum,
    /// Only a window of passing levels was observed.
    WindowOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KChoice {
    pub k: usize,
    pub route: KRoute,
    /// Level up to which every `k` was checked.
    pub scanned_to: usize,
    /// Largest value of `max_i q_i(k)` seen above `K`.
    pub worst_above: f64,
}

/// Levels scanned explicitly when an analytic threshold is available.
pub const ANALYTIC_SCAN_CAP: usize = 5_000;
/// Levels scanned in total before giving up in window mode.
pub const WINDOW_SCAN_CAP: usize = 1_000_000;

/// `max_i (1/V'(k)) sum_{l > floor(delta0 k^{1-alpha})} V(k + l) A^{*M}(l) e`.
pub fn k_quantity(vf: &VFamily, tail: &TailSource, delta0: f64, k: usize) -> Result<f64> {
    let kf = k as f64;
    let j = (delta0 * kf.powf(1.0 - vf.alpha())).floor() as usize + 1;
    let w = tail.weighted_tail(vf, kf, j)?;
    Ok(w.max() / vf.dv(kf))
}

/// Threshold beyond which `q_i(k) <= C_i k^{2 - beta_i} <= kappa` for polynomial `V` against
/// power-law increments, where `C_i = rho^beta0 delta0^{-beta_i + beta0 + 1} c_i /
/// (beta0 (beta_i - beta0 - 1))` and `rho = max(1 + 1/delta0, x0)`.
pub fn analytic_k_threshold(vf: &VFamily, laws: &[PowerLaw], kappa: f64, delta0: f64) -> Option<f64> {
    let VFamily::Polynomial { beta0, x0 } = *vf else {
        return None;
    };
    let rho = (1.0 + 1.0 / delta0).max(x0);
    let mut k = 0.0f64;
    for law in laws {
        let b = law.exponent;
        if !(b > 2.0 && b > beta0 + 1.0) {
            return None;
        }
        let c = rho.powf(beta0) * delta0.powf(-b + beta0 + 1.0) * law.coef / (beta0 * (b - beta0 - 1.0));
        k = k.max((c / kappa).powf(1.0 / (b - 2.0)).ceil());
    }
    Some(k)
}

/// Smallest `K >= K0` with `q(k) <= kappa` for every `k > K`, under the strongest available route.
pub fn choose_k(
    vf: &VFamily,
    tail: &TailSource,
    kappa: f64,
    delta0: f64,
    k0: usize,
    window: usize,
) -> Result<KChoice> {
    if window == 0 {
        return Err(invalid("window must be positive"));
    }
    let alpha = vf.alpha();
    let (end, route) = match tail {
        TailSource::Table(t) => {
            // J(k) > max_k once delta0 k^{1-alpha} >= max_k.
            let top = t.max_k().max(0) as f64;
            let end = (top / delta0).powf(1.0 / (1.0 - alpha)).ceil() + 1.0;
            if end <= (k0 + WINDOW_SCAN_CAP) as f64 {
                (Some(end as usize), KRoute::EmptySum)
            } else {
                (None, KRoute::WindowOnly)
            }
        }
        TailSource::PowerLaw(laws) => match analytic_k_threshold(vf, laws, kappa, delta0) {
            Some(th) if th <= (k0 + ANALYTIC_SCAN_CAP) as f64 => (Some(th as usize), KRoute::AnalyticTail),
            _ => (None, KRoute::WindowOnly),
        },
    };
    let mut last_violation = k0;
    let mut worst_above = 0.0f64;
    let mut k = k0 + 1;
    loop {
        let stop = match end {
            Some(e) => k > e.max(k0 + 1),
            None => k > last_violation + window,
        };
        if stop {
            break;
        }
        if end.is_none() && k > k0 + WINDOW_SCAN_CAP {
            return Err(Error::SearchExhausted(format!(
                "K not found within {WINDOW_SCAN_CAP} levels above K0 = {k0}"
            )));
        }
        let q = k_quantity(vf, tail, delta0, k)?;
        if q > kappa {
            last_violation = k;
            worst_above = 0.0;
        } else {
            worst_above = worst_above.max(q);
        }
        k += 1;
    }
    Ok(KChoice { k: last_violation, route, scanned_to: k - 1, worst_above })
}

/// `max_{k <= K, i} [P_N^M v - v + kappa V'](k, i)`, floored at machine epsilon so that the
/// certificate has a positive `b`.
pub fn compute_b<G: GiG1Kernel>(
    vf: &VFamily,
    g_n: &G,
    m: usize,
    kappa: f64,
    k: usize,
    tail: &TailSource,
) -> Result<f64> {
    let p = Assembled(g_n);
    let d = g_n.phases();
    let vf_owned = *vf;
    let v = BlockVector::level_only(d, move |l| vf_owned.v(l as f64));
    let bound = tail.one_step_bound(vf);
    let tb: Option<&TailBound<'_>> = if m == 1 { Some(&bound) } else { None };
    let mut b = f64::EPSILON;
    for level in 0..=k {
        let pv = expected_v(&p, &v, level, m, tb)?;
        let x = level as f64;
        for i in 0..d {
            b = b.max(pv[i] - vf.v(x) + kappa * vf.dv(x));
        }
    }
    Ok(b)
}

/// Drift certificate with `v(k) = V(k) e` and `phi = kappa V' o V^{-1}`.
pub fn assemble_certificate(
    vf: &VFamily,
    d: usize,
    kappa: f64,
    b: f64,
    k: usize,
    m: usize,
    big_b: Option<f64>,
) -> Result<DriftCertificate> {
    let phi = vf.phi(kappa)?;
    check_phi(phi.as_ref())?;
    for level in 0..=1000 {
        let x = level as f64;
        let lhs = phi.phi(vf.v(x));
        let rhs = kappa * vf.dv(x);
        if (lhs - rhs).abs() > 1e-12 * rhs.abs() {
            return Err(Error::AssumptionUnverified(format!(
                "phi(V({level})) = {lhs} differs from kappa V'({level}) = {rhs}"
            )));
        }
    }
    let owned = *vf;
    let v = BlockVector::level_only(d, move |l| owned.v(l as f64));
    DriftCertificate::new(v, phi as Arc<_>, b, k, m, big_b)
}

/// Limits for the searches of [`run_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub n_max: usize,
    pub m_max: usize,
    /// Fixed `epsilon` instead of the grid search.
    pub epsilon: Option<f64>,
    pub pos_tail_tol: f64,
    /// Upper end of the `(delta0, K0)` verification range.
    pub k_max: usize,
    pub window: usize,
    /// Levels above `K` on which the assembled drift inequality is re-verified.
    pub verify_extra: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_max: 64,
            m_max: 64,
            epsilon: None,
            pos_tail_tol: 1e-14,
            k_max: 1 << 16,
            window: 1000,
            verify_extra: 200,
        }
    }
}

/// Everything chosen by [`run_pipeline`].
#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub sigma: f64,
    pub n: usize,
    pub sigma_n: f64,
    pub m: usize,
    pub kappa: f64,
    pub epsilon: f64,
    pub kappa_slack: Vec<f64>,
    pub v_assumption: VAssumptionReport,
    pub delta0: f64,
    pub k0: usize,
    pub k: KChoice,
    pub b: f64,
    /// `b / min_i [P^M(K; 0) e]_i`; absent when `K = 0` or when level 0 is unreachable from `K`
    /// in `M` steps.
    pub big_b: Option<f64>,
    pub big_b_note: Option<String>,
    pub drift_worst_slack: f64,
    #[serde(skip)]
    pub certificate: DriftCertificate,
    #[serde(skip)]
    pub drift: DriftReport,
}

/// Runs every stage, from the choice of `N` to a verified drift certificate.
pub fn run_pipeline<G: GiG1Kernel>(g: &G, vf: &VFamily, cfg: &PipelineConfig) -> Result<PipelineReport> {
    validate_kernel(g)?;
    let sigma = mean_drift_sigma(g)?;
    let n = choose_n(g, cfg.n_max)?;
    let g_n = modified_kernel(g, n)?;
    let sigma_n = mean_drift_sigma(&g_n)?;
    let m = choose_m0(&g_n, cfg.m_max)?;
    let ke = match cfg.epsilon {
        None => choose_kappa_epsilon(&g_n, m, cfg.pos_tail_tol)?,
        Some(eps) => {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(invalid(format!("epsilon must lie in (0, 1), got {eps}")));
            }
            let (total, pos) = convolution_moments(&g_n, m, cfg.pos_tail_tol)?;
            let (kappa, slack) = kappa_for_epsilon(&total, &pos, eps);
            if !(kappa > 0.0) {
                return Err(Error::Contract(format!("epsilon = {eps} admits no positive kappa")));
            }
            super::KappaEpsilon { kappa, epsilon: eps, slack }
        }
    };
    let v_assumption = check_v_assumption(vf, &g_n, m, cfg.pos_tail_tol)?;
    let tail = TailSource::from_kernel(&g_n, m, cfg.pos_tail_tol)?;
    let (delta0, k0) = choose_delta0_k0(vf, ke.epsilon, m * n, cfg.k_max)?;
    let k = choose_k(vf, &tail, ke.kappa, delta0, k0, cfg.window)?;
    let b = compute_b(vf, &g_n, m, ke.kappa, k.k, &tail)?;
    let (big_b, big_b_note) = if k.k == 0 {
        (None, None)
    } else {
        match compute_big_b(&Assembled(g), m, k.k, b) {
            Ok(x) => (Some(x), None),
            Err(Error::HypothesisViolated(msg)) => (None, Some(msg)),
            Err(e) => return Err(e),
        }
    };
    let certificate = assemble_certificate(vf, g.phases(), ke.kappa, b, k.k, m, big_b)?;
    let bound = tail.one_step_bound(vf);
    let tb: Option<&TailBound<'_>> = if m == 1 { Some(&bound) } else { None };
    let drift = verify_drift(&Assembled(&g_n), &certificate, k.k + cfg.verify_extra, tb)?;
    if !drift.passed {
        return Err(Error::Contract(format!(
            "assembled certificate fails the drift inequality at level {} (slack {:e})",
            drift.worst_level, drift.worst_slack
        )));
    }
    Ok(PipelineReport {
        sigma,
        n,
        sigma_n,
        m,
        kappa: ke.kappa,
        epsilon: ke.epsilon,
        kappa_slack: ke.slack.iter().copied().collect(),
        v_assumption,
        delta0,
        k0,
        k,
        b,
        big_b,
        big_b_note,
        drift_worst_slack: drift.worst_slack,
        certificate,
        drift,
    })
}

/// Bound for the original chain from the pipeline outputs, with `v(k) = V(k) e` and
/// `phi(v(n)) = kappa V'(n)`.
pub fn bound_gig1(rep: &PipelineReport, vf: &VFamily, d: usize, m: f64, n: f64) -> Result<BoundReport> {
    if rep.k.k > 0 && rep.big_b.is_none() {
        return Err(Error::HypothesisViolated(
            rep.big_b_note.clone().unwrap_or_else(|| "B is unavailable".into()),
        ));
    }
    let phi = vf.phi(rep.kappa)?;
    let inp = ExtendedInputs {
        m,
        n,
        steps: rep.m as u64,
        b: rep.b,
        big_b: rep.big_b,
        k: rep.k.k as u64,
        v1_varpi: vf.v(1.0),
        phi_v_n: vec![rep.kappa * vf.dv(n); d],
    };
    let mut r = bound_extended(&inp, &phi)?;
    r.variant = if rep.k.k == 0 { Variant::Gig1K0 } else { Variant::Gig1 };
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockmatrix::Block;
    use crate::gig1::TabulatedGiG1;

    fn m2(a: f64, b: f64, c: f64, d: f64) -> Block {
        Block::from_row_slice(2, 2, &[a, b, c, d])
    }

    fn bounded_walk() -> TabulatedGiG1 {
        let a = vec![
            m2(0.15, 0.15, 0.1, 0.2),
            m2(0.2, 0.1, 0.15, 0.15),
            m2(0.1, 0.1, 0.1, 0.1),
            m2(0.1, 0.1, 0.1, 0.1),
        ];
        TabulatedGiG1::reflected(-2, a).unwrap()
    }

    #[test]
    fn polynomial_delta0_closed_form() {
        let eps: f64 = 0.230_762_969_401_438_5;
        let vf = VFamily::polynomial(1.5, 1.0 / (1.0 - (1.0 - eps).powi(2))).unwrap();
        let (d0, k0) = choose_delta0_k0(&vf, eps, 1, 1 << 14).unwrap();
        assert!((d0 - 0.514_777_486_849_846_2).abs() < 1e-14);
        assert_eq!(k0, 1);
    }

    #[test]
    fn k0_grows_when_x0_is_small() {
        let vf = VFamily::polynomial(1.5, 1.0).unwrap();
        let (_, k0) = choose_delta0_k0(&vf, 0.1, 1, 1 << 14).unwrap();
        // (k - 1 + 1)/(k + 1) >= 0.9^2 first holds for every k > K0 at K0 = 4.
        assert_eq!(k0, 4);
    }

    #[test]
    fn delta_trials_for_exponential_family() {
        let vf = VFamily::moderately_exponential(0.5, 0.5, 16.0).unwrap();
        let (d0, k0) = choose_delta0_k0(&vf, 0.2, 2, 1 << 14).unwrap();
        assert!(d0 > 0.0 && d0 <= 1.0);
        for k in k0 + 1..=(1 << 14) {
            let kf = k as f64;
            assert!(vf.dv(kf + d0 * kf.sqrt()) <= 1.2 * vf.dv(kf) * (1.0 + 1e-12));
            assert!(vf.dv(kf - 2.0) >= 0.8 * vf.dv(kf) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn bounded_jumps_give_empty_sum_route() {
        let g = bounded_walk();
        let vf = VFamily::polynomial(1.5, 2.0).unwrap();
        let tail = TailSource::from_kernel(&g, 1, 1e-14).unwrap();
        let kc = choose_k(&vf, &tail, 0.05, 0.5, 1, 100).unwrap();
        assert_eq!(kc.route, KRoute::EmptySum);
        // Jumps are at most 1, so the sum over l > floor(k/2) is empty once k >= 2.
        assert_eq!(kc.k, 1);
    }

    #[test]
    fn pipeline_on_bounded_walk() {
        let g = bounded_walk();
        let vf = VFamily::polynomial(1.5, 2.0).unwrap();
        let rep = run_pipeline(&g, &vf, &PipelineConfig::default()).unwrap();
        assert!(rep.sigma < 0.0);
        assert_eq!(rep.n, 1);
        assert!(rep.kappa > 0.0);
        assert!(rep.drift.passed);
        assert!(rep.b > 0.0);
    }

    #[test]
    fn b_is_monotone_in_k() {
        let g = bounded_walk();
        let vf = VFamily::polynomial(1.5, 2.0).unwrap();
        let g1 = modified_kernel(&g, 1).unwrap();
        let tail = TailSource::from_kernel(&g1, 1, 1e-14).unwrap();
        let mut prev = 0.0;
        for k in 0..6 {
            let b = compute_b(&vf, &g1, 1, 0.1, k, &tail).unwrap();
            assert!(b >= prev);
            prev = b;
        }
    }
}

