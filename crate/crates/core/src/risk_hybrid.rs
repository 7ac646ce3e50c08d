//! Bayes risk of hybrid censored plans (stop at the r-th failure or at tau).

use crate::error::{Error, Result};
use crate::kernel::{
    add_count_law, bucket_sum, hybrid_entries, survival_powers, ThresholdKernel,
    TERM_RELATIVE_ERROR,
};
use crate::model::{AcceptanceCost, CostModel, EstimatorLaw, HybridPlan, Scheme};
use crate::risk_type1::{assemble, check_rounding, check_size, RiskBreakdown};
use crate::specfun::{binomial, inc_beta_xy, ln_beta, ln_gamma, CompensatedSum, GammaPrior};

/// Bayes risk of a hybrid plan.
pub fn bayes_risk_hybrid(
    plan: &HybridPlan,
    costs: &CostModel,
    g: &AcceptanceCost,
    prior: &GammaPrior,
) -> Result<RiskBreakdown> {
    plan.validate()?;
    check_size(plan.n)?;
    let kernel = ThresholdKernel::new(costs, g, prior, plan.n)?;
    let entries = if plan.n == 0 {
        Vec::new()
    } else {
        hybrid_entries(plan.n, plan.r)
    };
    let slice = kernel.slice(plan.n, plan.tau, &entries);
    let th = kernel.eval(&slice, plan.zeta);
    let ef = expected_failures_hybrid(plan.n, plan.r, plan.tau, prior);
    let ed = expected_duration_hybrid(plan.n, plan.r, plan.tau, prior);
    let duration_err = if plan.n == 0 {
        0.0
    } else {
        stopped_duration(plan.n, plan.r, plan.tau, prior).1 * TERM_RELATIVE_ERROR * costs.c_time
    };
    let out = assemble(
        plan.n,
        ef,
        ed,
        th.value,
        th.rounding_error() + duration_err,
        costs,
        g,
        prior,
    );
    check_rounding(out.rounding_error)?;
    Ok(out)
}

/// Expected number of observed failures, `E[min(K, r)]` with `K` the failures by `tau`.
pub fn expected_failures_hybrid(n: usize, r: usize, tau: f64, prior: &GammaPrior) -> f64 {
    if n == 0 || r == 0 || tau <= 0.0 {
        return 0.0;
    }
    bucket_sum(&failure_buckets(n, r), &survival_powers(prior, tau, n))
}

/// Expected test duration, `E[min(X_(r), tau)]`.
pub fn expected_duration_hybrid(n: usize, r: usize, tau: f64, prior: &GammaPrior) -> f64 {
    if n == 0 || r == 0 || tau <= 0.0 {
        return 0.0;
    }
    let plateau = tau * bucket_sum(&plateau_buckets(n, r), &survival_powers(prior, tau, n));
    stopped_duration(n, r, tau, prior).0 + plateau
}

/// Shift buckets of `E[min(K, r)]`; `r = n` gives the Type-I count.
pub(crate) fn failure_buckets(n: usize, r: usize) -> Vec<i128> {
    let mut buckets = vec![0i128; n + 1];
    for kk in 1..=n {
        add_count_law(&mut buckets, n, kk, kk.min(r) as i128);
    }
    buckets
}

/// Shift buckets of `P(K < r)`.
pub(crate) fn plateau_buckets(n: usize, r: usize) -> Vec<i128> {
    let mut buckets = vec![0i128; n + 1];
    for kk in 0..r {
        add_count_law(&mut buckets, n, kk, 1);
    }
    buckets
}

/// `E[X_(r); X_(r) <= tau]` and the summed magnitude of its terms.
pub(crate) fn stopped_duration(n: usize, r: usize, tau: f64, prior: &GammaPrior) -> (f64, f64) {
    let (a, b) = (prior.shape, prior.rate);
    let outer = r as f64 * binomial(n, r) as f64;
    let eps = a - 1.0;
    let mut s = CompensatedSum::default();
    let mut magnitude = 0.0;
    for j in 0..r {
        let c = (n - j) as f64;
        let ln_ratio = (b / (b + c * tau)).ln();
        // [1 - (b / (b + c tau))^(a-1)] / (a-1), finite at a = 1
        let ratio_term = if eps == 0.0 {
            -ln_ratio
        } else {
            -(eps * ln_ratio).exp_m1() / eps
        };
        let bracket = b / (c * c) * ratio_term - tau / c * (a * ln_ratio).exp();
        let sign = if (r - 1 - j) % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * binomial(r - 1, j) as f64 * bracket;
        s.add(term);
        magnitude += term.abs();
    }
    ((outer * s.value()).max(0.0), outer * magnitude)
}

/// One integrated mixture component,
/// `Gamma(a + p) / C^(a+p) * I_S(m, a + p)` with `C = b + (n - m + j) tau`,
/// `S = C* / (1 + C*)`, `C* = m (1/zeta* - (n - m + j) tau / m) / C` clamped at
/// zero and `zeta* = max(zeta, 1 / (n tau))`.
///
/// This is the direct route through [`crate::specfun::reg_inc_beta`]; the risk
/// functions use a faster equivalent.
pub fn term_r(
    p: f64,
    j: i64,
    m: usize,
    n: usize,
    tau: f64,
    zeta: f64,
    prior: &GammaPrior,
) -> Result<f64> {
    if m == 0 || n == 0 || !(tau > 0.0) {
        return Err(Error::Domain(
            "term_r needs m >= 1, n >= 1 and tau > 0".into(),
        ));
    }
    let k = n as i64 - m as i64 + j;
    if k < 0 {
        return Err(Error::Domain(format!("shift n - m + j = {k} is negative")));
    }
    let (a, b) = (prior.shape, prior.rate);
    let beta = a + p;
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("a + p = {beta} must be positive")));
    }
    let mf = m as f64;
    let c = b + k as f64 * tau;
    let zeta_star = zeta.max(1.0 / (n as f64 * tau));
    let c_star = (mf * (1.0 / zeta_star - k as f64 * tau / mf) / c).max(0.0);
    let x = c_star / (1.0 + c_star);
    let y = 1.0 / (1.0 + c_star);
    let ib = inc_beta_xy(x, y, mf, beta, ln_beta(mf, beta))?;
    Ok((ln_gamma(beta) - beta * c.ln()).exp() * ib)
}

/// `P(lambda_hat >= zeta | lambda)` under hybrid censoring.
pub fn tail_probability_hybrid(
    n: usize,
    r: usize,
    tau: f64,
    zeta: f64,
    lambda: f64,
) -> Result<f64> {
    if zeta == 0.0 {
        return Ok(1.0);
    }
    let law = EstimatorLaw::new(Scheme::Hybrid { n, r, tau }, lambda)?;
    Ok(law.reject_probability(zeta))
}
