use lifeplan::bsp_ref::posterior_expected_cost;
use lifeplan::model::{AcceptanceCost, CostModel, CostTerm, HybridPlan, Type1Plan};
use lifeplan::risk_hybrid::{
    bayes_risk_hybrid, expected_duration_hybrid, expected_failures_hybrid, tail_probability_hybrid,
};
use lifeplan::risk_type1::{bayes_risk_type1, expected_failures_type1, tail_probability_type1};
use lifeplan::search::{perfect_information_risk, risk_surface};
use lifeplan::specfun::GammaPrior;
use proptest::prelude::*;

fn setting() -> impl Strategy<Value = (CostModel, AcceptanceCost, GammaPrior)> {
    (
        0.1..2.0f64,
        0.0..2.0f64,
        5.0..60.0f64,
        0.0..1.0f64,
        prop_oneof![
            Just(vec![2.0, 2.0, 2.0]),
            Just(vec![2.0; 6]),
            Just(vec![1.0, 0.5])
        ],
        1.0..6.0f64,
        0.4..3.0f64,
        any::<bool>(),
    )
        .prop_map(|(cs, ct, cr, salvage_frac, coefs, a, b, fractional)| {
            let costs = CostModel::new(cs, ct, cr, cs * salvage_frac).unwrap();
            let g = if fractional {
                AcceptanceCost::new(vec![
                    CostTerm {
                        coef: 2.0,
                        exponent: 0.0,
                    },
                    CostTerm {
                        coef: 2.0,
                        exponent: 1.5,
                    },
                ])
                .unwrap()
            } else {
                AcceptanceCost::polynomial(&coefs).unwrap()
            };
            (costs, g, GammaPrior::new(a, b).unwrap())
        })
}

fn plan_parts() -> impl Strategy<Value = (usize, usize, f64, f64)> {
    (1usize..=8).prop_flat_map(|n| (Just(n), 1..=n, 0.01..3.0f64, 0.0..8.0f64))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn risk_sits_above_its_floor((costs, g, prior) in setting(), (n, r, tau, zeta) in plan_parts()) {
        let floor = perfect_information_risk(&costs, &g, &prior);
        let t1 = bayes_risk_type1(&Type1Plan::new(n, tau, zeta).unwrap(), &costs, &g, &prior).unwrap();
        let fixed = n as f64 * costs.net_sample() + costs.salvage * t1.expected_failures + costs.c_time * tau;
        prop_assert!(t1.total >= fixed + floor - 1e-7, "{} < {}", t1.total, fixed + floor);
        let hy = bayes_risk_hybrid(&HybridPlan::new(n, r, tau, zeta).unwrap(), &costs, &g, &prior).unwrap();
        let fixed = n as f64 * costs.net_sample() + costs.salvage * hy.expected_failures + costs.c_time * hy.expected_duration;
        prop_assert!(hy.total >= fixed + floor - 1e-7);
    }

    #[test]
    fn hybrid_with_r_equal_n_matches_type1_decisions((costs, g, prior) in setting(), (n, _r, tau, zeta) in plan_parts()) {
        // same statistic and same decision; only the time cost differs
        let t1 = bayes_risk_type1(&Type1Plan::new(n, tau, zeta).unwrap(), &costs, &g, &prior).unwrap();
        let hy = bayes_risk_hybrid(&HybridPlan::new(n, n, tau, zeta).unwrap(), &costs, &g, &prior).unwrap();
        prop_assert!((t1.threshold - hy.threshold).abs() < 1e-8 + t1.rounding_error + hy.rounding_error);
        prop_assert!((t1.expected_failures - hy.expected_failures).abs() < 1e-9);
        prop_assert!(hy.expected_duration <= tau + 1e-12);
    }

    #[test]
    fn type1_expected_failures_identity(n in 0usize..=30, tau in 0.0..5.0f64, a in 0.5..10.0f64, b in 0.2..4.0f64) {
        let prior = GammaPrior::new(a, b).unwrap();
        let want = n as f64 * (1.0 - (b / (b + tau)).powf(a));
        prop_assert!((expected_failures_type1(n, tau, &prior) - want).abs() <= 1e-9);
    }

    #[test]
    fn hybrid_moments_are_ordered((n, r, tau, _) in plan_parts(), a in 0.5..6.0f64, b in 0.2..3.0f64) {
        let prior = GammaPrior::new(a, b).unwrap();
        let em = expected_failures_hybrid(n, r, tau, &prior);
        let ed = expected_duration_hybrid(n, r, tau, &prior);
        prop_assert!(em >= -1e-12 && em <= r as f64 + 1e-9);
        prop_assert!(em <= expected_failures_type1(n, tau, &prior) + 1e-9);
        prop_assert!(ed >= -1e-12 && ed <= tau + 1e-12);
    }

    #[test]
    fn tail_probability_is_a_falling_probability((n, r, tau, zeta) in plan_parts(), lambda in 0.01..6.0f64, dz in 0.0..2.0f64) {
        let p = tail_probability_type1(n, tau, zeta, lambda).unwrap();
        let q = tail_probability_type1(n, tau, zeta + dz, lambda).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p));
        prop_assert!(q <= p + 1e-9);
        let p = tail_probability_hybrid(n, r, tau, zeta, lambda).unwrap();
        let q = tail_probability_hybrid(n, r, tau, zeta + dz, lambda).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p));
        prop_assert!(q <= p + 1e-9);
    }

    #[test]
    fn posterior_cost_falls_with_exposure_and_rises_with_failures(
        (_, g, prior) in setting(), m in 0usize..10, z in 0.0..20.0f64, dz in 0.001..5.0f64
    ) {
        let here = posterior_expected_cost(m, z, &g, &prior).unwrap();
        prop_assert!(posterior_expected_cost(m, z + dz, &g, &prior).unwrap() < here);
        prop_assert!(posterior_expected_cost(m + 1, z, &g, &prior).unwrap() > here);
    }

    #[test]
    fn surface_agrees_with_pointwise_risk((costs, g, prior) in setting(), (n, r, tau, zeta) in plan_parts()) {
        let s = risk_surface(n, Some(r), &costs, &g, &prior, &[tau], &[zeta]).unwrap();
        let one = bayes_risk_hybrid(&HybridPlan::new(n, r, tau, zeta).unwrap(), &costs, &g, &prior).unwrap();
        prop_assert!((s.at(0, 0) - one.total).abs() <= 1e-9 * one.total.abs().max(1.0));
    }
}
