//! Closed forms against the simulation oracle on a few fixed designs.
//! Four standard errors keep the false-alarm rate per assertion near 6e-5.

use lifeplan::bsp_ref::bsp_bayes_risk_mc;
use lifeplan::mc_oracle::{
    simulate_dsp_risk, simulate_moments, simulate_tail_probability, McConfig,
};
use lifeplan::model::{AcceptanceCost, CostModel, HybridPlan, Plan, Type1Plan};
use lifeplan::risk_hybrid::{
    bayes_risk_hybrid, expected_duration_hybrid, expected_failures_hybrid, tail_probability_hybrid,
};
use lifeplan::risk_type1::{bayes_risk_type1, tail_probability_type1};
use lifeplan::specfun::GammaPrior;

const SIGMAS: f64 = 4.0;

fn standard() -> (CostModel, AcceptanceCost, GammaPrior) {
    (
        CostModel::new(0.5, 5.0, 30.0, 0.3).unwrap(),
        AcceptanceCost::quadratic(2.0, 2.0, 2.0).unwrap(),
        GammaPrior::new(2.5, 0.8).unwrap(),
    )
}

#[test]
fn risks_agree_with_simulation() {
    let (costs, g, prior) = standard();
    let mc = McConfig::new(200_000, 101);
    let t1 = Type1Plan::new(4, 0.6, 2.5).unwrap();
    let closed = bayes_risk_type1(&t1, &costs, &g, &prior).unwrap().total;
    let est = simulate_dsp_risk(&Plan::Type1(t1), &costs, &g, &prior, &mc).unwrap();
    assert!(est.agrees_with(closed, SIGMAS), "type1 {closed} vs {est:?}");

    let hy = HybridPlan::new(6, 3, 0.2, 2.975).unwrap();
    let closed = bayes_risk_hybrid(&hy, &costs, &g, &prior).unwrap().total;
    let est = simulate_dsp_risk(&Plan::Hybrid(hy), &costs, &g, &prior, &mc).unwrap();
    assert!(
        est.agrees_with(closed, SIGMAS),
        "hybrid {closed} vs {est:?}"
    );
}

#[test]
fn hybrid_moments_agree_with_simulation() {
    let (_, _, prior) = standard();
    let hy = HybridPlan::new(7, 4, 0.9, 1.0).unwrap();
    let (m, d) = simulate_moments(
        &Plan::Hybrid(hy).scheme(),
        &prior,
        &McConfig::new(200_000, 5),
    )
    .unwrap();
    assert!(
        m.agrees_with(expected_failures_hybrid(7, 4, 0.9, &prior), SIGMAS),
        "{m:?}"
    );
    assert!(
        d.agrees_with(expected_duration_hybrid(7, 4, 0.9, &prior), SIGMAS),
        "{d:?}"
    );
}

#[test]
fn tail_probabilities_agree_with_simulation() {
    let mc = McConfig::new(100_000, 17);
    for lambda in [0.3, 1.0, 3.0] {
        let p = tail_probability_type1(5, 0.8, 1.5, lambda).unwrap();
        let est = simulate_tail_probability(
            lambda,
            &Plan::Type1(Type1Plan::new(5, 0.8, 1.5).unwrap()),
            &mc,
        )
        .unwrap();
        assert!(est.agrees_with(p, SIGMAS), "type1 {lambda}: {p} vs {est:?}");
        let p = tail_probability_hybrid(5, 2, 0.8, 1.5, lambda).unwrap();
        let est = simulate_tail_probability(
            lambda,
            &Plan::Hybrid(HybridPlan::new(5, 2, 0.8, 1.5).unwrap()),
            &mc,
        )
        .unwrap();
        assert!(
            est.agrees_with(p, SIGMAS),
            "hybrid {lambda}: {p} vs {est:?}"
        );
    }
}

#[test]
fn standard_error_shrinks_with_trials() {
    let (costs, g, prior) = standard();
    let plan = Plan::Type1(Type1Plan::new(3, 0.725, 2.975).unwrap());
    let small = simulate_dsp_risk(&plan, &costs, &g, &prior, &McConfig::new(50_000, 3)).unwrap();
    let large = simulate_dsp_risk(&plan, &costs, &g, &prior, &McConfig::new(100_000, 3)).unwrap();
    let ratio = large.std_error / small.std_error;
    assert!(
        (ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.03,
        "{ratio}"
    );
}

#[test]
fn bayes_rule_is_no_worse_than_the_plan() {
    let (costs, g, prior) = standard();
    let hy = HybridPlan::new(6, 3, 0.2, 2.975).unwrap();
    let dsp = bayes_risk_hybrid(&hy, &costs, &g, &prior).unwrap().total;
    let bsp = bsp_bayes_risk_mc(
        &Plan::Hybrid(hy).scheme(),
        &costs,
        &g,
        &prior,
        &McConfig::new(200_000, 23),
    )
    .unwrap();
    assert!(
        bsp.mean <= dsp + SIGMAS * bsp.std_error,
        "{} vs {dsp}",
        bsp.mean
    );
    assert!((bsp.mean - dsp).abs() < 0.05);
}
