//! Reference values computed outside the fast kernel: frozen 50-digit risks
//! and component sums through the continued fraction.

use lifeplan::error::Error;
use lifeplan::model::{AcceptanceCost, CostModel, CostTerm, HybridPlan, Type1Plan};
use lifeplan::risk_hybrid::{bayes_risk_hybrid, term_r};
use lifeplan::risk_type1::bayes_risk_type1;
use lifeplan::specfun::{log_gamma, GammaPrior};

/// (n, tau, zeta, quadratic-cost risk, fifth-degree-cost risk)
const TYPE1_REFERENCE: [(usize, f64, f64, f64, f64); 14] = [
    (10, 0.0125, 3.0, 33.51643907920929, 968.8345439507984),
    (14, 0.0125, 3.0, 34.28463902346415, 714.9766608830264),
    (14, 0.05, 3.0, 31.296885981713622, 295.9047163198486),
    (20, 0.0125, 3.0, 36.27435727800567, 477.87983365852267),
    (20, 0.05, 2.0, 34.71466722754207, 141.02051341518046),
    (20, 0.2, 2.0, 33.29871909146982, 92.81791617164933),
    (25, 0.05, 2.0, 36.09016008736416, 159.1947604783977),
    (25, 0.0125, 1.0, 38.39921344491169, 358.97329795434894),
    (30, 0.0125, 3.0, 41.099454749555136, 682.0920919261727),
    (30, 0.1, 2.0, 38.17412810696182, 105.28572497436278),
    (30, 0.3, 1.6, 39.613924400076876, 84.95686890974524),
    (30, 1.0, 1.6, 40.055729141779516, 82.82922679916469),
    (30, 0.025, 0.5, 41.665248277016744, 133.40850741394513),
    (22, 0.0375, 4.0, 35.786690958502, 558.6729764197504),
];

fn check(label: &str, got: Result<lifeplan::risk_type1::RiskBreakdown, Error>, want: f64) {
    match got {
        Ok(r) => {
            let err = (r.total - want).abs();
            println!("{label}: err {err:.3e} bound {:.3e}", r.rounding_error);
            assert!(
                err <= r.rounding_error,
                "{label}: {} vs {want}, bound {}",
                r.total,
                r.rounding_error
            );
        }
        // refusing is allowed; a wrong answer is not
        Err(Error::Unstable { estimate, .. }) => {
            println!("{label}: refused, estimate {estimate:.3e}")
        }
        Err(e) => panic!("{label}: {e}"),
    }
}

#[test]
fn rounding_bound_covers_true_error() {
    let quad = AcceptanceCost::quadratic(2.0, 2.0, 2.0).unwrap();
    let quint = AcceptanceCost::polynomial(&[2.0; 6]).unwrap();
    let costs_q = CostModel::new(0.5, 0.5, 30.0, 0.0).unwrap();
    let costs_p = CostModel::new(0.5, 0.5, 125.0, 0.0).unwrap();
    let prior_q = GammaPrior::new(2.5, 0.8).unwrap();
    let prior_p = GammaPrior::new(1.5, 0.8).unwrap();
    for &(n, tau, zeta, rq, rp) in &TYPE1_REFERENCE {
        let plan = Type1Plan::new(n, tau, zeta).unwrap();
        check(
            &format!("quad {n} {tau} {zeta}"),
            bayes_risk_type1(&plan, &costs_q, &quad, &prior_q),
            rq,
        );
        check(
            &format!("quint {n} {tau} {zeta}"),
            bayes_risk_type1(&plan, &costs_p, &quint, &prior_p),
            rp,
        );
    }
}

fn choose(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `E[(Cr - g(lambda)) 1{reject}]` summed component by component through the
/// continued-fraction route.
fn threshold_by_components(
    components: &[(usize, i64, f64)],
    n: usize,
    tau: f64,
    zeta: f64,
    cr: f64,
    g: &[(f64, f64)],
    prior: &GammaPrior,
) -> f64 {
    let norm = (prior.shape * prior.rate.ln() - log_gamma(prior.shape).unwrap()).exp();
    components
        .iter()
        .map(|&(m, j, coef)| {
            let reject = cr * term_r(0.0, j, m, n, tau, zeta, prior).unwrap();
            let cost: f64 = g
                .iter()
                .map(|&(a, p)| a * term_r(p, j, m, n, tau, zeta, prior).unwrap())
                .sum();
            coef * norm * (reject - cost)
        })
        .sum()
}

#[test]
fn fast_kernel_matches_component_sums() {
    let g_terms = [(2.0, 0.0), (2.0, 1.0), (2.0, 2.5)];
    let g = AcceptanceCost::new(
        g_terms
            .iter()
            .map(|&(coef, exponent)| CostTerm { coef, exponent })
            .collect(),
    )
    .unwrap();
    let costs = CostModel::new(0.5, 0.5, 30.0, 0.2).unwrap();
    let prior = GammaPrior::new(2.5, 0.8).unwrap();
    for (n, r, tau, zeta) in [
        (1, 1, 0.4, 1.0),
        (3, 2, 0.725, 2.975),
        (6, 3, 0.2, 2.975),
        (8, 5, 1.1, 0.6),
        (5, 5, 0.05, 4.0),
    ] {
        let mut type1 = Vec::new();
        for m in 1..=n {
            for j in 0..=m {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                type1.push((m, j as i64, sign * choose(n, m) * choose(m, j)));
            }
        }
        let want = threshold_by_components(&type1, n, tau, zeta, 30.0, &g_terms, &prior);
        let got =
            bayes_risk_type1(&Type1Plan::new(n, tau, zeta).unwrap(), &costs, &g, &prior).unwrap();
        assert!(
            (got.threshold - want).abs() < 1e-9,
            "type1 {n} {tau} {zeta}: {} vs {want}",
            got.threshold
        );

        let mut hybrid: Vec<_> = type1.iter().copied().filter(|c| c.0 < r).collect();
        hybrid.push((r, r as i64 - n as i64, 1.0));
        for k in 1..=r {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let coef = sign * choose(n, r) * r as f64 * choose(r - 1, k - 1) / (n - r + k) as f64;
            hybrid.push((r, k as i64, coef));
        }
        let want = threshold_by_components(&hybrid, n, tau, zeta, 30.0, &g_terms, &prior);
        let got = bayes_risk_hybrid(
            &HybridPlan::new(n, r, tau, zeta).unwrap(),
            &costs,
            &g,
            &prior,
        )
        .unwrap();
        assert!(
            (got.threshold - want).abs() < 1e-9,
            "hybrid {n} {r} {tau} {zeta}: {} vs {want}",
            got.threshold
        );
    }
}
