//! Bayes risk of Type-I censored plans.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{
    bucket_sum, survival_powers, threshold_coefficients, type1_entries, ThresholdKernel,
};
use crate::model::{AcceptanceCost, CostModel, Scheme, Type1Plan};
use crate::specfun::GammaPrior;

/// Largest sample size the alternating sums are evaluated for.
pub const STABILITY_CAP: usize = 30;

/// Largest estimated rounding error a returned risk may carry.
pub const ROUNDING_TOLERANCE: f64 = 1e-5;

/// Additive parts of a Bayes risk. `total` is their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskBreakdown {
    /// `n (c_sample - salvage)`
    pub sampling: f64,
    /// `salvage * E[M]`
    pub salvage: f64,
    /// `c_time * E[duration]`
    pub time: f64,
    /// prior expected acceptance cost
    pub acceptance: f64,
    /// expected extra cost of rejecting, relative to always accepting
    pub threshold: f64,
    pub total: f64,
    pub expected_failures: f64,
    pub expected_duration: f64,
    /// `(coefficient, power)` pairs of the threshold integrand
    pub threshold_coefficients: Vec<(f64, f64)>,
    /// estimated absolute rounding error of `total`
    pub rounding_error: f64,
}

pub(crate) fn check_size(n: usize) -> Result<()> {
    if n > STABILITY_CAP {
        return Err(Error::StabilityCap {
            n,
            cap: STABILITY_CAP,
        });
    }
    Ok(())
}

pub(crate) fn check_rounding(err: f64) -> Result<()> {
    if err > ROUNDING_TOLERANCE {
        return Err(Error::Unstable {
            estimate: err,
            tolerance: ROUNDING_TOLERANCE,
        });
    }
    Ok(())
}

/// Bayes risk of a Type-I plan.
pub fn bayes_risk_type1(
    plan: &Type1Plan,
    costs: &CostModel,
    g: &AcceptanceCost,
    prior: &GammaPrior,
) -> Result<RiskBreakdown> {
    plan.validate()?;
    check_size(plan.n)?;
    let kernel = ThresholdKernel::new(costs, g, prior, plan.n)?;
    let slice = kernel.slice(plan.n, plan.tau, &type1_entries(plan.n));
    let th = kernel.eval(&slice, plan.zeta);
    let expected_failures = expected_failures_type1(plan.n, plan.tau, prior);
    let out = assemble(
        plan.n,
        expected_failures,
        plan.tau,
        th.value,
        th.rounding_error(),
        costs,
        g,
        prior,
    );
    check_rounding(out.rounding_error)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble(
    n: usize,
    expected_failures: f64,
    expected_duration: f64,
    threshold: f64,
    threshold_error: f64,
    costs: &CostModel,
    g: &AcceptanceCost,
    prior: &GammaPrior,
) -> RiskBreakdown {
    let sampling = n as f64 * costs.net_sample();
    let salvage = expected_failures * costs.salvage;
    let time = expected_duration * costs.c_time;
    let acceptance = g.prior_expectation(prior);
    let total = sampling + salvage + time + acceptance + threshold;
    RiskBreakdown {
        sampling,
        salvage,
        time,
        acceptance,
        threshold,
        total,
        expected_failures,
        expected_duration,
        threshold_coefficients: threshold_coefficients(costs, g),
        rounding_error: threshold_error + 4.0 * f64::EPSILON * total.abs(),
    }
}

/// Expected number of failures by `tau`, aggregated over shifts in exact
/// integer arithmetic before the powers are applied.
pub fn expected_failures_type1(n: usize, tau: f64, prior: &GammaPrior) -> f64 {
    if n == 0 || tau <= 0.0 {
        return 0.0;
    }
    bucket_sum(
        &crate::risk_hybrid::failure_buckets(n, n),
        &survival_powers(prior, tau, n),
    )
}

/// `P(lambda_hat >= zeta | lambda)`, the probability that the plan rejects.
pub fn tail_probability_type1(n: usize, tau: f64, zeta: f64, lambda: f64) -> Result<f64> {
    if zeta == 0.0 {
        return Ok(1.0);
    }
    let law = crate::model::EstimatorLaw::new(Scheme::Type1 { n, tau }, lambda)?;
    Ok(law.reject_probability(zeta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard() -> (CostModel, AcceptanceCost, GammaPrior) {
        (
            CostModel::new(0.5, 0.5, 30.0, 0.0).unwrap(),
            AcceptanceCost::quadratic(2.0, 2.0, 2.0).unwrap(),
            GammaPrior::new(2.5, 0.8).unwrap(),
        )
    }

    #[test]
    fn no_sampling_plans() {
        let (costs, g, prior) = standard();
        let reject =
            bayes_risk_type1(&Type1Plan::new(0, 0.0, 0.0).unwrap(), &costs, &g, &prior).unwrap();
        assert!((reject.total - 30.0).abs() < 1e-12);
        let accept = bayes_risk_type1(
            &Type1Plan::new(0, 0.0, f64::INFINITY).unwrap(),
            &costs,
            &g,
            &prior,
        )
        .unwrap();
        let mu = 2.0 + 2.0 * 3.125 + 2.0 * 2.5 * 3.5 / 0.64;
        assert!((accept.total - mu).abs() < 1e-12);
    }

    #[test]
    fn always_accept_and_always_reject_thresholds() {
        let (costs, g, prior) = standard();
        let mu = g.prior_expectation(&prior);
        let plan = Type1Plan::new(3, 0.725, f64::INFINITY).unwrap();
        let r = bayes_risk_type1(&plan, &costs, &g, &prior).unwrap();
        assert!((r.total - (1.5 + 0.3625 + mu)).abs() < 1e-12);
        let plan = Type1Plan::new(3, 0.725, 0.0).unwrap();
        let r = bayes_risk_type1(&plan, &costs, &g, &prior).unwrap();
        assert!((r.total - (1.5 + 0.3625 + 30.0)).abs() < 1e-10);
    }

    #[test]
    fn expected_failures_closed_form() {
        let prior = GammaPrior::new(2.5, 0.8).unwrap();
        for n in [1, 3, 10, 25] {
            for tau in [0.0125, 0.725, 4.0] {
                let want = n as f64 * (1.0 - (0.8f64 / (0.8 + tau)).powf(2.5));
                assert!((expected_failures_type1(n, tau, &prior) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stability_cap_is_enforced() {
        let (costs, g, prior) = standard();
        let plan = Type1Plan::new(STABILITY_CAP + 1, 1.0, 2.0).unwrap();
        assert!(matches!(
            bayes_risk_type1(&plan, &costs, &g, &prior),
            Err(Error::StabilityCap { .. })
        ));
    }
}
