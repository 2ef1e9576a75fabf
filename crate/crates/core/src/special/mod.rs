//! The heavy-tailed two-phase example: closed-form constants, bound, tolerance plan and the
//! check of the inequality that defines `K`.

mod chain;
pub mod zeta;

pub use chain::ZetaChain;

use serde::Serialize;

use crate::bounds::{tolerance_plan, BoundReport, ExtendedInputs, Variant};
use crate::blockmatrix::BlockVector;
use crate::drift::{DriftCertificate, PowerPhi};
use crate::error::{invalid, Error, Result};
use crate::gig1::{modified_kernel, Modified, TailSource, VFamily};
use zeta::{weighted_power_tail, zeta};

/// Every constant of the example, from `(beta1, beta2, beta0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecialCaseParams {
    pub beta1: f64,
    pub beta2: f64,
    pub beta0: f64,
    /// `zeta(beta_i - 1) / zeta(beta_i)`.
    pub zeta_ratio: [f64; 2],
    pub sigma: f64,
    pub sigma1: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub delta0: f64,
    pub x0: f64,
    pub k0: usize,
    pub rho: f64,
    pub c1: f64,
    pub c2: f64,
    /// `max(K0, ceil((C1/kappa)^{1/(beta1-2)}), ceil((C2/kappa)^{1/(beta2-2)}))`.
    pub k: usize,
    /// `max(floor(C1/kappa)^{1/(beta1-2)}, floor(C2/kappa)^{1/(beta2-2)})`, the floor-inside
    /// reading, reported for comparison.
    pub k_floor_inside: f64,
    /// `sum_l (K + l + x0)^beta0 (l + 1)^{-beta_i} / (2 zeta(beta_i))`.
    pub b_series: [f64; 2],
    /// Series maximum plus `kappa beta0 (K + x0)^{beta0 - 1}`.
    pub b: f64,
    /// `2^K b`.
    pub big_b: f64,
    /// `(2^K b + 1)^{-1 + 1/beta0}`.
    pub c_breve: f64,
}

/// Closed-form constants. Requires `2 < beta1 < beta2` and `1 < beta0 < beta1 - 1`.
pub fn closed_form_params(beta1: f64, beta2: f64, beta0: f64) -> Result<SpecialCaseParams> {
    let chain = ZetaChain::new(beta1, beta2)?;
    if !(beta0 > 1.0 && beta0 < beta1 - 1.0) {
        return Err(invalid(format!("need 1 < beta0 < beta1 - 1, got beta0 = {beta0}")));
    }
    let r = [chain.ratio(0), chain.ratio(1)];
    let sigma = 0.25 * (r[0] + r[1] - 6.0);
    let sigma1 = 0.25 * (r[0] + r[1] - 4.0);
    if !(r[0] < 2.0) {
        return Err(Error::Domain(format!(
            "zeta(beta1 - 1) / zeta(beta1) = {} must be below 2 for kappa > 0; increase beta1",
            r[0]
        )));
    }
    let kappa = 0.25 * (1.0 - 0.5 * r[0]);
    let epsilon = 0.5 * (2.0 / r[0] - 1.0);
    let e = 1.0 / (beta0 - 1.0);
    let delta0 = (1.0 + epsilon).powf(e) - 1.0;
    let x0 = 1.0 / (1.0 - (1.0 - epsilon).powf(e));
    let rho = (1.0 + 1.0 / delta0).max(x0);
    let c_of = |b: f64| -> Result<f64> {
        Ok(rho.powf(beta0) * delta0.powf(-b + beta0 + 1.0)
            / (2.0 * beta0 * (b - beta0 - 1.0) * zeta(b)?))
    };
    let (c1, c2) = (c_of(beta1)?, c_of(beta2)?);
    let k0 = 1usize;
    let k = [(c1, beta1), (c2, beta2)]
        .iter()
        .map(|&(c, b)| (c / kappa).powf(1.0 / (b - 2.0)).ceil() as usize)
        .fold(k0, usize::max);
    let k_floor_inside = [(c1, beta1), (c2, beta2)]
        .iter()
        .map(|&(c, b)| (c / kappa).floor().powf(1.0 / (b - 2.0)))
        .fold(0.0, f64::max);
    let shift = k as f64 + x0 - 1.0;
    let mut b_series = [0.0; 2];
    for (i, &beta) in [beta1, beta2].iter().enumerate() {
        let est = weighted_power_tail(1, shift, beta0, beta - beta0)?;
        if est.abs_err > 1e-10 * est.value {
            return Err(Error::Contract(format!("series for b not certified to 1e-10: {est:?}")));
        }
        b_series[i] = est.value / (2.0 * zeta(beta)?);
    }
    let b = b_series[0].max(b_series[1]) + kappa * beta0 * (k as f64 + x0).powf(beta0 - 1.0);
    let pow2k = 2f64.powi(k as i32);
    let big_b = pow2k * b;
    let c_breve = (big_b + 1.0).powf(-1.0 + 1.0 / beta0);
    Ok(SpecialCaseParams {
        beta1,
        beta2,
        beta0,
        zeta_ratio: r,
        sigma,
        sigma1,
        kappa,
        epsilon,
        delta0,
        x0,
        k0,
        rho,
        c1,
        c2,
        k,
        k_floor_inside,
        b_series,
        b,
        big_b,
        c_breve,
    })
}

impl SpecialCaseParams {
    pub fn chain(&self) -> ZetaChain {
        ZetaChain::new(self.beta1, self.beta2).expect("validated at construction")
    }

    /// The kernel of `P_1`.
    pub fn folded_chain(&self) -> Modified<ZetaChain> {
        modified_kernel(self.chain(), 1).expect("N = 1 is valid")
    }

    pub fn v_family(&self) -> VFamily {
        VFamily::Polynomial { beta0: self.beta0, x0: self.x0 }
    }

    pub fn phi(&self) -> PowerPhi {
        PowerPhi::new(self.kappa, self.beta0).expect("kappa > 0 and beta0 > 1")
    }

    /// Certified tails of `sum_l V(k + l) A(l) e`.
    pub fn tail_source(&self) -> TailSource {
        TailSource::PowerLaw(crate::gig1::GiG1Kernel::power_law(&self.chain()).expect("power law"))
    }

    /// `v(k) = (k + x0)^beta0 e`, `phi(t) = kappa beta0 t^{1 - 1/beta0}`, with the given `b`.
    pub fn certificate_with_b(&self, b: f64) -> Result<DriftCertificate> {
        let (x0, beta0) = (self.x0, self.beta0);
        let v = BlockVector::level_only(2, move |k| (k as f64 + x0).powf(beta0));
        let big_b = 2f64.powi(self.k as i32) * b;
        DriftCertificate::new(v, std::sync::Arc::new(self.phi()), b, self.k, 1, Some(big_b))
    }

    pub fn certificate(&self) -> Result<DriftCertificate> {
        self.certificate_with_b(self.b)
    }

    /// `(1 + x0)^beta0 + 2^K b`.
    fn v1_plus_big_b(&self) -> f64 {
        (1.0 + self.x0).powf(self.beta0) + self.big_b
    }

    /// First term of the bound: `8 / c * {(1 + x0)^beta0 + 2^K b} / (kappa beta0 {kappa c (m - 1) + 1}^{beta0 - 1})`.
    pub fn mixing_term(&self, m: f64) -> f64 {
        let (kappa, beta0, c) = (self.kappa, self.beta0, self.c_breve);
        8.0 / c / (kappa * beta0 * (kappa * c * (m - 1.0) + 1.0).powf(beta0 - 1.0)) * self.v1_plus_big_b()
    }

    /// Second term: `4 m b / (kappa beta0 (n + x0)^{beta0 - 1})`.
    pub fn truncation_term(&self, m: f64, n: f64) -> f64 {
        4.0 * m * self.b / (self.kappa * self.beta0 * (n + self.x0).powf(self.beta0 - 1.0))
    }

    /// Inputs of the generic bound with `M = 1`, `d = 2`.
    pub fn extended_inputs(&self, m: f64, n: f64) -> ExtendedInputs {
        let phi_n = crate::drift::Phi::phi(&self.phi(), (n + self.x0).powf(self.beta0));
        ExtendedInputs {
            m,
            n,
            steps: 1,
            b: self.b,
            big_b: Some(self.big_b),
            k: self.k as u64,
            v1_varpi: (1.0 + self.x0).powf(self.beta0),
            phi_v_n: vec![phi_n, phi_n],
        }
    }
}

/// The closed-form bound at `(m, n)`; counts are integer-valued `f64`.
pub fn bound_special(p: &SpecialCaseParams, m: f64, n: f64) -> Result<BoundReport> {
    crate::bounds::check_count("m", m)?;
    crate::bounds::check_count("n", n)?;
    Ok(BoundReport::new(m, n, p.mixing_term(m), p.truncation_term(m, n), Variant::Special))
}

/// `(m0, n0)` from the ceiling formulas, each nudged upward if rounding left its term above
/// `E / 2`.
pub fn plan_tolerance_special(p: &SpecialCaseParams, target: f64) -> Result<(f64, f64)> {
    if !(target > 0.0 && target < 2.0) {
        return Err(invalid(format!("tolerance must lie in (0, 2), got {target}")));
    }
    let (kappa, beta0, c) = (p.kappa, p.beta0, p.c_breve);
    let e = 1.0 / (beta0 - 1.0);
    let inner = (16.0 / c / (kappa * beta0 * target) * p.v1_plus_big_b()).powf(e) - 1.0;
    let mut m0 = (inner / (kappa * c)).ceil().max(0.0) + 1.0;
    if !m0.is_finite() {
        return Err(Error::ToleranceUnreachable {
            residual: f64::INFINITY,
            detail: format!("m0 overflows double precision at E = {target:e}"),
        });
    }
    while p.mixing_term(m0) > 0.5 * target {
        m0 = next_integer(m0);
    }
    let mut n0 = ((8.0 * m0 * p.b / (kappa * beta0 * target)).powf(e) - p.x0).ceil().max(1.0);
    if !n0.is_finite() {
        return Err(Error::ToleranceUnreachable {
            residual: f64::INFINITY,
            detail: format!("n0 overflows double precision at E = {target:e}"),
        });
    }
    while p.truncation_term(m0, n0) > 0.5 * target {
        n0 = next_integer(n0);
    }
    Ok((m0, n0))
}

fn next_integer(x: f64) -> f64 {
    let step = (x * f64::EPSILON).max(1.0);
    x + step
}

/// The same plan found by search over the two terms of the bound.
pub fn plan_tolerance_generic(p: &SpecialCaseParams, target: f64) -> Result<(f64, f64)> {
    tolerance_plan(
        target,
        |m| Ok(p.mixing_term(m)),
        |m, n| Ok(p.truncation_term(m, n)),
        f64::MAX,
    )
}

/// One level of the check of the inequality defining `K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailInequalityRow {
    pub k: usize,
    /// `(1/V'(k)) sum_{l > floor(delta0 k)} V(k + l) A(l) e`.
    pub quantity: [f64; 2],
    /// `(C1 k^{2 - beta1}, C2 k^{2 - beta2})`.
    pub intermediate: [f64; 2],
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailInequalityReport {
    pub kappa: f64,
    pub rows: Vec<TailInequalityRow>,
    pub all_passed: bool,
}

/// Evaluates `quantity <= intermediate <= kappa` on every `k` in `[k_from, k_to]`.
pub fn tail_inequality_check(p: &SpecialCaseParams, k_from: usize, k_to: usize) -> Result<TailInequalityReport> {
    if k_from <= p.k {
        return Err(invalid(format!("k_from must exceed K = {}, got {k_from}", p.k)));
    }
    if k_to < k_from {
        return Err(invalid("empty range"));
    }
    let betas = [p.beta1, p.beta2];
    let cs = [p.c1, p.c2];
    let mut rows = Vec::with_capacity(k_to - k_from + 1);
    for k in k_from..=k_to {
        let kf = k as f64;
        let j = (p.delta0 * kf).floor() as u64 + 1;
        let dv = p.beta0 * (kf + p.x0).powf(p.beta0 - 1.0);
        let mut quantity = [0.0; 2];
        let mut intermediate = [0.0; 2];
        for i in 0..2 {
            let s = weighted_power_tail(j + 1, kf + p.x0 - 1.0, p.beta0, betas[i] - p.beta0)?;
            quantity[i] = s.value / (2.0 * zeta(betas[i])?) / dv;
            intermediate[i] = cs[i] * kf.powf(2.0 - betas[i]);
        }
        let passed = (0..2).all(|i| quantity[i] <= intermediate[i] && intermediate[i] <= p.kappa + 1e-12);
        rows.push(TailInequalityRow { k, quantity, intermediate, passed });
    }
    let all_passed = rows.iter().all(|r| r.passed);
    Ok(TailInequalityReport { kappa: p.kappa, rows, all_passed })
}
