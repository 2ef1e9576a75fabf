use approx::assert_relative_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;

use lcbound::blockmatrix::{BlockKernel, FnKernel};
use lcbound::bounds::tolerance_plan;
use lcbound::drift::{h_phi, h_phi_numeric, r_phi, r_phi_numeric, Phi, PowerPhi};
use lcbound::gig1::{Assembled, GiG1Kernel, VFamily};
use lcbound::solver::{
    residual, stationary_dense_lu, stationary_gth_states, total_variation, FiniteStochasticMatrix, ProbabilityVector,
};
use lcbound::special::{bound_special, closed_form_params, plan_tolerance_special, ZetaChain};
use lcbound::truncation::lc_block_augment;

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn prob(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len).prop_map(normalize)
}

fn stochastic(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prob(n), n).prop_map(|rows| rows.concat())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn tv_is_a_metric(a in prob(12), b in prob(12), c in prob(12)) {
        let pv = |v: &Vec<f64>| ProbabilityVector::new(2, v.clone()).unwrap();
        let (a, b, c) = (pv(&a), pv(&b), pv(&c));
        let ab = total_variation(&a, &b).unwrap();
        prop_assert_eq!(ab, total_variation(&b, &a).unwrap());
        prop_assert!((0.0..=2.0 + 1e-12).contains(&ab));
        prop_assert_eq!(total_variation(&a, &a).unwrap(), 0.0);
        let via = total_variation(&a, &c).unwrap() + total_variation(&c, &b).unwrap();
        prop_assert!(ab <= via + 1e-12);
    }

    #[test]
    fn gth_matches_lu(n in 2usize..24, seed in any::<u64>()) {
        let data = {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            (0..n).flat_map(|_| normalize((0..n).map(|_| rng.gen_range(0.01..1.0)).collect())).collect::<Vec<_>>()
        };
        let m = FiniteStochasticMatrix::dense(n, data).unwrap();
        let g = stationary_gth_states(&m).unwrap();
        let l = stationary_dense_lu(&m).unwrap();
        prop_assert!(residual(&m, &g) <= 1e-12);
        for (x, y) in g.iter().zip(&l) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn truncation_is_stochastic_and_keeps_blocks(n in 1usize..10, p in stochastic(4)) {
        // Two phases, up to one level up; rows at level k mix the fixed table with a level-dependent drift.
        let table = DMatrix::from_row_slice(2, 4, &[p[0], p[1], p[2], p[3] + 1.0, p[4], p[5], p[6] + 1.0, p[7]]);
        let kern = FnKernel::new(2, 1, move |k, l| {
            let mut b = DMatrix::zeros(2, 2);
            if l + 1 == k || (k == 0 && l == 0) {
                b += table.columns(0, 2) * 0.5;
            }
            if l == k + 1 {
                b += table.columns(2, 2) * 0.5;
            }
            b
        });
        let m = lc_block_augment(&kern, n).unwrap();
        for i in 0..m.states() {
            let s: f64 = m.row(i).map(|(_, v)| v).sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
        for k in 0..=n {
            for l in 0..n {
                let b = kern.block(k, l);
                for i in 0..2 {
                    for j in 0..2 {
                        prop_assert_eq!(m.get(2 * k + i, 2 * l + j), b[(i, j)]);
                    }
                }
            }
        }
    }

    #[test]
    fn zeta_kernel_tail_identity(b1 in 3.0f64..8.0, db in 0.01f64..4.0, k in 0usize..20, l in 0usize..40) {
        let p = Assembled(ZetaChain::new(b1, b1 + db).unwrap());
        let lhs = p.tail_block(k, l);
        let rhs = p.tail_block(k, l + 1) + p.block(k, l);
        prop_assert!((lhs - rhs).abs().max() <= 1e-12);
        let t0 = p.tail_block(k, 0);
        for i in 0..2 {
            prop_assert!((t0.row(i).sum() - 1.0).abs() <= 1e-12);
        }
        prop_assert!(p.block(k, l).min() >= 0.0);
    }

    #[test]
    fn ratio_is_decreasing_in_beta(b in 3.0f64..8.0, db in 0.01f64..2.0) {
        let c = ZetaChain::new(b, b + db).unwrap();
        prop_assert!(c.ratio(1) < c.ratio(0));
    }

    #[test]
    fn special_case_memberships(b1 in 3.0f64..8.0, db in 0.01f64..4.0, t in 0.05f64..0.95) {
        let b0 = 1.0 + t * (b1 - 2.0);
        let p = closed_form_params(b1, b1 + db, b0).unwrap();
        prop_assert!(p.sigma < 0.0 && p.sigma1 < 0.0);
        prop_assert!(p.kappa > 1.0 / 24.0);
        prop_assert!(p.epsilon > 0.1 && p.epsilon < 0.5);
        prop_assert!(p.x0 > 1.0 && p.delta0 > 0.0);
        prop_assert_eq!(p.rho, (1.0 + 1.0 / p.delta0).max(p.x0));
        prop_assert!(p.b > 0.0 && p.big_b >= p.b);
    }

    #[test]
    fn special_bound_is_monotone(m in 1.0f64..1e30, n in 1.0f64..1e30, f in 1.0f64..100.0) {
        let p = closed_form_params(3.0, 4.0, 1.5).unwrap();
        let at = bound_special(&p, m, n).unwrap();
        prop_assert!(at.bound_value >= 0.0);
        prop_assert!((at.bound_value - at.term_mixing - at.term_truncation).abs() <= 1e-12 * at.bound_value);
        let more_n = bound_special(&p, m, n * f).unwrap();
        prop_assert!(more_n.bound_value <= at.bound_value);
        let more_m = bound_special(&p, m * f, n).unwrap();
        prop_assert!(more_m.term_mixing <= at.term_mixing);
        prop_assert!(more_m.term_truncation >= at.term_truncation);
    }

    #[test]
    fn planner_is_monotone_in_tolerance(e in 0.01f64..1.9, f in 0.1f64..0.99) {
        let p = closed_form_params(3.0, 4.0, 1.5).unwrap();
        let (m1, n1) = plan_tolerance_special(&p, e).unwrap();
        let (m2, n2) = plan_tolerance_special(&p, e * f).unwrap();
        prop_assert!(m2 >= m1 && n2 >= n1);
        prop_assert!(bound_special(&p, m2, n2).unwrap().bound_value <= e * f);
    }

    #[test]
    fn generic_plan_meets_target(e in 0.05f64..1.9, kappa in 0.01f64..1.0, beta0 in 1.1f64..4.0) {
        let phi = PowerPhi::new(kappa, beta0).unwrap();
        let mixing = |m: f64| Ok(8.0 * 3.0 / r_phi(&phi, m - 1.0)?);
        let trunc = |m: f64, n: f64| Ok(2.0 * m / phi.phi(n));
        let (m0, n0) = match tolerance_plan(e, mixing, trunc, 1e300) {
            Ok(plan) => plan,
            // Slow phi: the truncation term at m0 stays above E/2 up to n_max.
            Err(lcbound::Error::ToleranceUnreachable { residual, .. }) => {
                prop_assert!(residual > e / 2.0);
                return Ok(());
            }
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert!(mixing(m0).unwrap() <= e / 2.0);
        prop_assert!(trunc(m0, n0).unwrap() <= e / 2.0);
    }

    #[test]
    fn power_phi_shape(kappa in 0.01f64..2.0, beta0 in 1.1f64..5.0, t in 1.0f64..1e6, s in 1.0f64..1e6) {
        let phi = PowerPhi::new(kappa, beta0).unwrap();
        let (lo, hi) = (t.min(s), t.max(s));
        prop_assert!(phi.phi(lo) <= phi.phi(hi) + 1e-12);
        prop_assert!(phi.phi(0.5 * (lo + hi)) >= 0.5 * (phi.phi(lo) + phi.phi(hi)) - 1e-10 * phi.phi(hi));
        prop_assert!(phi.phi_prime(hi) <= phi.phi_prime(lo));
    }

    #[test]
    fn closed_forms_match_quadrature(kappa in 0.05f64..2.0, beta0 in 1.2f64..4.0, x in 1.0f64..1e4) {
        let phi = PowerPhi::new(kappa, beta0).unwrap();
        let h = h_phi(&phi, x).unwrap();
        assert_relative_eq!(h, h_phi_numeric(&phi, x).unwrap(), epsilon = 1e-9, max_relative = 1e-8);
        let r = r_phi(&phi, x).unwrap();
        assert_relative_eq!(r, r_phi_numeric(&phi, x).unwrap(), max_relative = 1e-7);
    }

    #[test]
    fn polynomial_v_shape(beta0 in 1.1f64..6.0, x0 in 1.0f64..10.0, x in 0.0f64..1e4, dx in 0.01f64..10.0) {
        let v = VFamily::polynomial(beta0, x0).unwrap();
        prop_assert!(v.v(0.0) >= 1.0);
        prop_assert!(v.v(x + dx) > v.v(x));
        prop_assert!(v.v(x + dx / 2.0) <= 0.5 * (v.v(x) + v.v(x + dx)) * (1.0 + 1e-12));
        prop_assert!(v.ln_v(x + dx / 2.0) >= 0.5 * (v.ln_v(x) + v.ln_v(x + dx)) - 1e-12);
        assert_relative_eq!(v.v_inv(v.v(x)).unwrap(), x, epsilon = 1e-8, max_relative = 1e-9);
    }
}

#[test]
fn zeta_chain_has_two_phases() {
    assert_eq!(ZetaChain::new(3.0, 4.0).unwrap().phases(), 2);
}
