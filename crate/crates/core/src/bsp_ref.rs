//! Bayes decision rule for a fixed design and its simulated Bayes risk.
//!
//! After `m` failures with total time on test `z` the posterior is
//! gamma(m + a, z + b), and accepting costs the posterior mean of `g`,
//! `phi(m, z)`. The rule accepts when `phi(m, z) <= c_reject`. `phi` falls
//! strictly in `z`, so the rule is `accept iff z >= cutoff(m)`, with the
//! cutoff found by bisection for any cost shape.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc_oracle::{
    draw_rate, estimate_for, prior_sampler, run_trials, validate_plan, McConfig, McEstimate,
};
use crate::model::{
    decide, draw_life_test, loss_of, AcceptanceCost, CostModel, Decision, Plan, Scheme,
};
use crate::specfun::{ln_gamma, GammaPrior};

/// Bisection stops once the bracket is this narrow.
pub const ROOT_TOLERANCE: f64 = 1e-10;

/// Acceptance region `z >= cutoff` after `m` failures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesDecisionThreshold {
    pub m: usize,
    /// `y = z + b` at which `phi` equals `c_reject`; infinite when accepting
    /// never pays, zero when it always does
    pub root: f64,
    /// `0 v (root - b)`, also capped at `n tau` when `m >= 1`; infinite
    /// when accepting never pays
    pub cutoff: f64,
}

impl BayesDecisionThreshold {
    pub fn decide(&self, z: f64) -> Decision {
        if z >= self.cutoff {
            Decision::Accept
        } else {
            Decision::Reject
        }
    }
}

/// `E[lambda^p]` under gamma(shape, rate) for each cost term, times its coefficient.
fn posterior_terms(m: usize, g: &AcceptanceCost, prior: &GammaPrior) -> Vec<(f64, f64)> {
    let shape = m as f64 + prior.shape;
    g.terms()
        .iter()
        .map(|t| {
            let p = t.exponent;
            let factor = if p.fract() == 0.0 && p <= 64.0 {
                (0..p as usize).map(|i| shape + i as f64).product::<f64>()
            } else {
                (ln_gamma(shape + p) - ln_gamma(shape)).exp()
            };
            (t.coef * factor, p)
        })
        .collect()
}

fn phi_at(terms: &[(f64, f64)], y: f64) -> f64 {
    terms
        .iter()
        .map(|&(c, p)| if p == 0.0 { c } else { c / y.powf(p) })
        .sum()
}

/// Posterior expected acceptance cost after `m` failures and total time on test `z`.
pub fn posterior_expected_cost(
    m: usize,
    z: f64,
    g: &AcceptanceCost,
    prior: &GammaPrior,
) -> Result<f64> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!(
            "total time on test {z} must be finite and nonnegative"
        )));
    }
    Ok(phi_at(&posterior_terms(m, g, prior), z + prior.rate))
}

/// Acceptance cutoff on `z` after `m` failures of a test run under `scheme`.
pub fn bsp_threshold(
    m: usize,
    scheme: &Scheme,
    costs: &CostModel,
    g: &AcceptanceCost,
    prior: &GammaPrior,
) -> Result<BayesDecisionThreshold> {
    if m > scheme.max_failures() {
        return Err(Error::Inconsistent(format!(
            "{m} failures exceed the {} the scheme allows",
            scheme.max_failures()
        )));
    }
    let terms = posterior_terms(m, g, prior);
    let constant: f64 = terms.iter().filter(|t| t.1 == 0.0).map(|t| t.0).sum();
    let excess = costs.c_reject - constant;
    let root = if excess <= 0.0 {
        // phi >= a0 >= c_reject: rejecting is never worse
        f64::INFINITY
    } else if terms.iter().all(|&(c, p)| p == 0.0 || c == 0.0) {
        0.0
    } else {
        let over = |y: f64| phi_at(&terms, y) > costs.c_reject;
        let mut hi = prior.rate.max(1.0);
        while over(hi) {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        while hi - lo > ROOT_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if over(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut cutoff = (root - prior.rate).max(0.0);
    if m >= 1 && root.is_finite() {
        cutoff = cutoff.min(scheme.n() as f64 * scheme.tau());
    }
    Ok(BayesDecisionThreshold { m, root, cutoff })
}

/// Bayes risk of the design `scheme` used with the Bayes decision rule, by simulation.
pub fn bsp_bayes_risk_mc(
    scheme: &Scheme,
    costs: &CostModel,
    g: &AcceptanceCost,
    prior: &GammaPrior,
    mc: &McConfig,
) -> Result<McEstimate> {
    if let Scheme::Hybrid { n, r, .. } = *scheme {
        if r == 0 && n > 0 || r > n {
            return Err(Error::InvalidParameter(format!(
                "stopping count {r} outside 1..={n}"
            )));
        }
    }
    let rules = rules_for(scheme, costs, g, prior)?;
    let sampler = prior_sampler(prior)?;
    let [risk] = run_trials(mc, |rng| {
        let lambda = draw_rate(&sampler, rng);
        let outcome = draw_life_test(lambda, scheme, rng);
        let decision = rules[outcome.m()].decide(outcome.total_time_on_test());
        [loss_of(&outcome, decision, lambda, costs, g)]
    })?;
    Ok(risk)
}

fn rules_for(
    scheme: &Scheme,
    costs: &CostModel,
    g: &AcceptanceCost,
    prior: &GammaPrior,
) -> Result<Vec<BayesDecisionThreshold>> {
    (0..=scheme.max_failures())
        .map(|m| bsp_threshold(m, scheme, costs, g, prior))
        .collect()
}

/// Plan and Bayes rule run on the same simulated tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub dsp: McEstimate,
    pub bsp: McEstimate,
    /// per-test loss of the plan minus that of the rule; nonzero only where
    /// the two decisions differ, so its error is far below either risk's
    pub gain: McEstimate,
}

impl PairedComparison {
    /// Rule risk with the plan's simulated loss as control variate, given
    /// the plan's exact risk.
    pub fn bsp_controlled(&self, dsp_exact: f64) -> McEstimate {
        McEstimate {
            mean: dsp_exact - self.gain.mean,
            std_error: self.gain.std_error,
            trials: self.gain.trials,
        }
    }
}

/// Simulates `plan` and the Bayes rule on its design with common draws.
pub fn compare_with_plan_mc(
    plan: &Plan,
    costs: &CostModel,
    g: &AcceptanceCost,
    prior: &GammaPrior,
    mc: &McConfig,
) -> Result<PairedComparison> {
    validate_plan(plan)?;
    let scheme = plan.scheme();
    let rules = rules_for(&scheme, costs, g, prior)?;
    let sampler = prior_sampler(prior)?;
    let [dsp, bsp, gain] = run_trials(mc, |rng| {
        let lambda = draw_rate(&sampler, rng);
        let outcome = draw_life_test(lambda, &scheme, rng);
        let by_plan = decide(estimate_for(plan, &outcome), plan.zeta());
        let by_rule = rules[outcome.m()].decide(outcome.total_time_on_test());
        let lp = loss_of(&outcome, by_plan, lambda, costs, g);
        let lr = if by_rule == by_plan {
            lp
        } else {
            loss_of(&outcome, by_rule, lambda, costs, g)
        };
        [lp, lr, lp - lr]
    })?;
    Ok(PairedComparison { dsp, bsp, gain })
}
