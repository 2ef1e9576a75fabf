//! The two-phase chain with geometric downward and zeta-distributed upward jumps.
//!
//! Every increment block is antidiagonal, so each transition flips the phase. For `k <= -1` both
//! antidiagonal entries of `A(k)` are `2^{k-1}`; for `k >= 0` the entry leaving phase `i` is
//! `(k + 1)^{-beta_i} / (2 zeta(beta_i))`. The boundary row is `B(0) = underline_A(0)`,
//! `B(l) = A(l)`.

use crate::blockmatrix::Block;
use crate::error::{invalid, Result};
use crate::gig1::{GiG1Kernel, PowerLaw};
use crate::special::zeta::{hurwitz_zeta, zeta};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaChain {
    beta: [f64; 2],
    /// `1 / (2 zeta(beta_i))`.
    coef: [f64; 2],
}

impl ZetaChain {
    /// Requires `2 < beta1 < beta2`.
    pub fn new(beta1: f64, beta2: f64) -> Result<Self> {
        if !(beta1 > 2.0 && beta2 > beta1 && beta2.is_finite()) {
            return Err(invalid(format!("need 2 < beta1 < beta2, got ({beta1}, {beta2})")));
        }
        Ok(ZetaChain { beta: [beta1, beta2], coef: [0.5 / zeta(beta1)?, 0.5 / zeta(beta2)?] })
    }

    pub fn betas(&self) -> (f64, f64) {
        (self.beta[0], self.beta[1])
    }

    /// `zeta(beta_i - 1) / zeta(beta_i)`.
    pub fn ratio(&self, i: usize) -> f64 {
        zeta(self.beta[i] - 1.0).expect("beta_i > 2") * 2.0 * self.coef[i]
    }

    fn antidiag(x0: f64, x1: f64) -> Block {
        Block::from_row_slice(2, 2, &[0.0, x0, x1, 0.0])
    }

    fn entries(&self, k: i64) -> (f64, f64) {
        if k <= -1 {
            let v = 2f64.powi((k - 1) as i32);
            (v, v)
        } else {
            let x = (k + 1) as f64;
            (self.coef[0] * x.powf(-self.beta[0]), self.coef[1] * x.powf(-self.beta[1]))
        }
    }

    /// `sum_{j >= k} (j + 1)^{-beta_i} / (2 zeta(beta_i))` for `k >= 0`.
    fn upper(&self, i: usize, k: i64) -> f64 {
        self.coef[i] * hurwitz_zeta(self.beta[i], (k + 1) as f64).expect("beta_i > 2")
    }
}

impl GiG1Kernel for ZetaChain {
    fn phases(&self) -> usize {
        2
    }

    fn a(&self, k: i64) -> Block {
        let (x0, x1) = self.entries(k);
        Self::antidiag(x0, x1)
    }

    fn write_a(&self, k: i64, out: &mut [f64]) {
        let (x0, x1) = self.entries(k);
        out[..4].copy_from_slice(&[0.0, x0, x1, 0.0]);
    }

    fn a_upper_tail(&self, k: i64) -> Block {
        if k >= 0 {
            Self::antidiag(self.upper(0, k), self.upper(1, k))
        } else {
            let v = 1.0 - 2f64.powi((k - 1) as i32);
            Self::antidiag(v, v)
        }
    }

    fn a_lower_tail(&self, k: i64) -> Block {
        if k <= -1 {
            let v = 2f64.powi(k as i32);
            Self::antidiag(v, v)
        } else {
            Self::antidiag(1.0 - self.upper(0, k + 1), 1.0 - self.upper(1, k + 1))
        }
    }

    fn a_total(&self) -> Block {
        Self::antidiag(1.0, 1.0)
    }

    fn b(&self, l: usize) -> Block {
        if l == 0 {
            self.a_lower_tail(0)
        } else {
            self.a(l as i64)
        }
    }

    fn b_tail(&self, l: usize) -> Block {
        if l == 0 {
            self.a_total()
        } else {
            self.a_upper_tail(l as i64)
        }
    }

    fn first_moment_pos(&self) -> Block {
        Self::antidiag(0.5 * (self.ratio(0) - 1.0), 0.5 * (self.ratio(1) - 1.0))
    }

    fn first_moment_neg(&self) -> Block {
        Self::antidiag(-1.0, -1.0)
    }

    fn negative_reach(&self) -> Option<usize> {
        None
    }

    fn positive_reach(&self) -> Option<usize> {
        None
    }

    fn boundary_reach(&self) -> Option<usize> {
        None
    }

    fn power_law(&self) -> Option<Vec<PowerLaw>> {
        Some(
            (0..2)
                .map(|i| PowerLaw { coef: self.coef[i], exponent: self.beta[i] })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gig1::{mean_drift_sigma, phase_stationary, sigma_n, underline_a};
    use approx::assert_relative_eq;

    #[test]
    fn rows_of_a_sum_to_one() {
        let z = ZetaChain::new(3.0, 4.0).unwrap();
        let mut neg = 0.0;
        for k in -60..=-1 {
            neg += z.a(k)[(0, 1)];
        }
        assert_relative_eq!(neg, 0.5, max_relative = 1e-15);
        let pos = z.a_upper_tail(0);
        assert_relative_eq!(pos[(0, 1)], 0.5, max_relative = 1e-14);
        assert_relative_eq!(pos[(1, 0)], 0.5, max_relative = 1e-14);
        let w = phase_stationary(&z).unwrap();
        assert_relative_eq!(w[0], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn tails_are_consistent() {
        let z = ZetaChain::new(3.0, 4.0).unwrap();
        for k in -5..20i64 {
            let lhs = z.a_upper_tail(k) - z.a_upper_tail(k + 1);
            assert!((lhs - z.a(k)).abs().max() < 1e-15, "upper at {k}");
            let rhs = z.a_lower_tail(k) - z.a_lower_tail(k - 1);
            assert!((rhs - z.a(k)).abs().max() < 1e-15, "lower at {k}");
            let total = z.a_lower_tail(k) + z.a_upper_tail(k + 1);
            assert!((total - z.a_total()).abs().max() < 1e-15);
        }
        // underline_A(1) is the antidiagonal matrix with entries 1/2.
        let u = underline_a(&z, 1);
        assert_eq!(u[(0, 1)], 0.5);
        assert_eq!(u[(1, 0)], 0.5);
    }

    #[test]
    fn drifts_match_closed_forms() {
        let z = ZetaChain::new(3.0, 4.0).unwrap();
        let (r1, r2) = (z.ratio(0), z.ratio(1));
        let sigma = mean_drift_sigma(&z).unwrap();
        assert_relative_eq!(sigma, 0.25 * (r1 + r2 - 6.0), max_relative = 1e-12);
        assert_relative_eq!(sigma, -0.880_235_171_763_411_5, max_relative = 1e-12);
        let s1 = sigma_n(&z, 1).unwrap();
        assert_relative_eq!(s1, 0.25 * (r1 + r2 - 4.0), max_relative = 1e-12);
        assert_relative_eq!(s1, -0.380_235_171_763_411_5, max_relative = 1e-12);
    }

    #[test]
    fn moments_against_direct_sums() {
        let z = ZetaChain::new(3.5, 5.0).unwrap();
        let mp = z.first_moment_pos();
        let mut direct = 0.0;
        for k in (1..2_000_000i64).rev() {
            direct += k as f64 * z.a(k)[(1, 0)];
        }
        // Remainder beyond 2e6 is below 2e6^{-2} / (2 * 2 zeta(5)).
        assert!((mp[(1, 0)] - direct).abs() < 1e-12);
        let mut neg = 0.0;
        for k in -80..=-1i64 {
            neg += k as f64 * z.a(k)[(0, 1)];
        }
        assert_relative_eq!(z.first_moment_neg()[(0, 1)], neg, max_relative = 1e-14);
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(ZetaChain::new(2.0, 3.0).is_err());
        assert!(ZetaChain::new(3.0, 3.0).is_err());
        assert!(ZetaChain::new(4.0, 3.0).is_err());
    }
}
