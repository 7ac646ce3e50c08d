//! Cost model, plans, censored outcomes and the decision rule.

use rand::Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{hybrid_entries, type1_entries, Entry};
use crate::specfun::{gamma_pdf_unchecked, reg_lower_gamma, CompensatedSum, GammaPrior};

/// Per-item, per-time, rejection and salvage costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c_sample: f64,
    pub c_time: f64,
    pub c_reject: f64,
    pub salvage: f64,
}

impl CostModel {
    /// All costs must be finite and nonnegative, and salvage may not exceed
    /// the sampling cost.
    pub fn new(c_sample: f64, c_time: f64, c_reject: f64, salvage: f64) -> Result<Self> {
        let all = [c_sample, c_time, c_reject, salvage];
        if all.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "costs must be finite and nonnegative, got {all:?}"
            )));
        }
        if salvage > c_sample {
            return Err(Error::InvalidParameter(format!(
                "salvage value {salvage} exceeds the sampling cost {c_sample}"
            )));
        }
        Ok(Self {
            c_sample,
            c_time,
            c_reject,
            salvage,
        })
    }

    /// Net cost of putting one item on test, `c_sample - salvage`.
    pub fn net_sample(&self) -> f64 {
        self.c_sample - self.salvage
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTerm {
    pub coef: f64,
    pub exponent: f64,
}

/// Cost of accepting a batch with failure rate lambda, `sum_l a_l lambda^p_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceCost {
    terms: Vec<CostTerm>,
}

impl AcceptanceCost {
    /// Exponents must be nonnegative and strictly increasing, coefficients
    /// nonnegative.
    pub fn new(terms: Vec<CostTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter(
                "acceptance cost needs at least one term".into(),
            ));
        }
        if terms.len() >= crate::kernel::MAX_WEIGHTS {
            return Err(Error::InvalidParameter(format!(
                "at most {} acceptance-cost terms are supported",
                crate::kernel::MAX_WEIGHTS - 1
            )));
        }
        for t in &terms {
            if !(t.coef >= 0.0 && t.coef.is_finite())
                || !(t.exponent >= 0.0 && t.exponent.is_finite())
            {
                return Err(Error::InvalidParameter(format!(
                    "bad acceptance-cost term {t:?}"
                )));
            }
        }
        if terms.windows(2).any(|w| w[0].exponent >= w[1].exponent) {
            return Err(Error::InvalidParameter(
                "acceptance-cost exponents must be strictly increasing".into(),
            ));
        }
        Ok(Self { terms })
    }

    /// `a_0 + a_1 lambda + a_2 lambda^2 + ...`
    pub fn polynomial(coefs: &[f64]) -> Result<Self> {
        Self::new(
            coefs
                .iter()
                .enumerate()
                .map(|(i, &coef)| CostTerm {
                    coef,
                    exponent: i as f64,
                })
                .collect(),
        )
    }

    pub fn quadratic(a0: f64, a1: f64, a2: f64) -> Result<Self> {
        Self::polynomial(&[a0, a1, a2])
    }

    pub fn terms(&self) -> &[CostTerm] {
        &self.terms
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * lambda.powf(t.exponent))
            .sum()
    }

    /// Prior expected acceptance cost, `sum_l a_l E[lambda^p_l]`.
    pub fn prior_expectation(&self, prior: &GammaPrior) -> f64 {
        let mut s = CompensatedSum::default();
        for t in &self.terms {
            s.add(t.coef * prior.moment(t.exponent).expect("exponents are nonnegative"));
        }
        s.value()
    }
}

/// Type-I plan: `n` items, fixed test time `tau`, accept iff the rate estimate
/// is below `zeta`. `zeta = f64::INFINITY` always accepts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Type1Plan {
    pub n: usize,
    pub tau: f64,
    pub zeta: f64,
}

/// Hybrid plan: stop at the `r`-th failure or at `tau`, whichever comes first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridPlan {
    pub n: usize,
    pub r: usize,
    pub tau: f64,
    pub zeta: f64,
}

fn check_tau_zeta(tau: f64, zeta: f64) -> Result<()> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "test time must be finite and nonnegative, got {tau}"
        )));
    }
    if !(zeta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "acceptance threshold must be nonnegative, got {zeta}"
        )));
    }
    Ok(())
}

impl Type1Plan {
    pub fn new(n: usize, tau: f64, zeta: f64) -> Result<Self> {
        let p = Self { n, tau, zeta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_tau_zeta(self.tau, self.zeta)
    }
}

impl HybridPlan {
    pub fn new(n: usize, r: usize, tau: f64, zeta: f64) -> Result<Self> {
        let p = Self { n, r, tau, zeta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_tau_zeta(self.tau, self.zeta)?;
        if self.n == 0 && self.r != 0 {
            return Err(Error::InvalidParameter(
                "r must be 0 when no items are tested".into(),
            ));
        }
        if self.n > 0 && !(1..=self.n).contains(&self.r) {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= r <= n, got r {} with n {}",
                self.r, self.n
            )));
        }
        Ok(())
    }
}

/// A plan of either censoring scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Plan {
    Type1(Type1Plan),
    Hybrid(HybridPlan),
}

impl Plan {
    pub fn n(&self) -> usize {
        match self {
            Plan::Type1(p) => p.n,
            Plan::Hybrid(p) => p.n,
        }
    }

    /// Stopping count; `None` for Type-I.
    pub fn r(&self) -> Option<usize> {
        match self {
            Plan::Type1(_) => None,
            Plan::Hybrid(p) => Some(p.r),
        }
    }

    pub fn tau(&self) -> f64 {
        match self {
            Plan::Type1(p) => p.tau,
            Plan::Hybrid(p) => p.tau,
        }
    }

    pub fn zeta(&self) -> f64 {
        match self {
            Plan::Type1(p) => p.zeta,
            Plan::Hybrid(p) => p.zeta,
        }
    }

    pub fn scheme(&self) -> Scheme {
        match *self {
            Plan::Type1(p) => p.into(),
            Plan::Hybrid(p) => p.into(),
        }
    }
}

/// Censoring scheme of a life test, without the decision threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scheme {
    Type1 { n: usize, tau: f64 },
    Hybrid { n: usize, r: usize, tau: f64 },
}

impl Scheme {
    pub fn n(&self) -> usize {
        match *self {
            Scheme::Type1 { n, .. } | Scheme::Hybrid { n, .. } => n,
        }
    }

    pub fn tau(&self) -> f64 {
        match *self {
            Scheme::Type1 { tau, .. } | Scheme::Hybrid { tau, .. } => tau,
        }
    }

    /// Maximum number of failures that can be observed.
    pub fn max_failures(&self) -> usize {
        match *self {
            Scheme::Type1 { n, .. } => n,
            Scheme::Hybrid { r, .. } => r,
        }
    }

    pub(crate) fn entries(&self) -> Vec<Entry> {
        match *self {
            Scheme::Type1 { n, .. } => type1_entries(n),
            Scheme::Hybrid { n, r, .. } => {
                if n == 0 {
                    Vec::new()
                } else {
                    hybrid_entries(n, r)
                }
            }
        }
    }
}

impl From<Type1Plan> for Scheme {
    fn from(p: Type1Plan) -> Self {
        Scheme::Type1 { n: p.n, tau: p.tau }
    }
}

impl From<HybridPlan> for Scheme {
    fn from(p: HybridPlan) -> Self {
        Scheme::Hybrid {
            n: p.n,
            r: p.r,
            tau: p.tau,
        }
    }
}

/// Observed result of a censored life test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifeTestOutcome {
    /// items put on test
    pub n: usize,
    /// observed failure times, ascending
    pub failures: Vec<f64>,
    /// time at which the test stopped
    pub duration: f64,
}

impl LifeTestOutcome {
    pub fn m(&self) -> usize {
        self.failures.len()
    }

    /// Total time on test: failure times plus the survivors' time to the stop.
    pub fn total_time_on_test(&self) -> f64 {
        let s: f64 = self.failures.iter().sum();
        s + (self.n - self.m()) as f64 * self.duration
    }

    fn check(&self) -> Result<()> {
        if self.m() > self.n {
            return Err(Error::Inconsistent(format!(
                "{} failures among {} items",
                self.m(),
                self.n
            )));
        }
        if self
            .failures
            .iter()
            .any(|x| !(*x >= 0.0) || *x > self.duration)
        {
            return Err(Error::Inconsistent(
                "failure time outside [0, duration]".into(),
            ));
        }
        if self.failures.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Inconsistent("failure times are not sorted".into()));
        }
        Ok(())
    }
}

/// Rate estimate under Type-I censoring, `M / total time on test` (0 if `M = 0`).
pub fn lambda_hat_type1(outcome: &LifeTestOutcome, tau: f64) -> Result<f64> {
    outcome.check()?;
    if outcome.duration != tau {
        return Err(Error::Inconsistent(format!(
            "Type-I test must stop at {tau}, stopped at {}",
            outcome.duration
        )));
    }
    Ok(rate_estimate(outcome))
}

/// Rate estimate under hybrid censoring. If the r-th failure was observed the
/// test stopped there; otherwise it ran to `tau`.
pub fn lambda_hat_hybrid(outcome: &LifeTestOutcome, r: usize, tau: f64) -> Result<f64> {
    outcome.check()?;
    let m = outcome.m();
    if m > r {
        return Err(Error::Inconsistent(format!(
            "{m} failures exceed the stopping count {r}"
        )));
    }
    if m == r && m > 0 {
        let last = outcome.failures[m - 1];
        if outcome.duration != last || last > tau {
            return Err(Error::Inconsistent(
                "hybrid test must stop at the r-th failure".into(),
            ));
        }
    } else if outcome.duration != tau {
        return Err(Error::Inconsistent(format!(
            "hybrid test with fewer than r failures must stop at {tau}"
        )));
    }
    Ok(rate_estimate(outcome))
}

fn rate_estimate(outcome: &LifeTestOutcome) -> f64 {
    match outcome.m() {
        0 => 0.0,
        m => m as f64 / outcome.total_time_on_test(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Accept,
    Reject,
}

/// Accept iff `lambda_hat < zeta`; a tie rejects.
pub fn decide(lambda_hat: f64, zeta: f64) -> Decision {
    if lambda_hat < zeta {
        Decision::Accept
    } else {
        Decision::Reject
    }
}

/// Simulates one censored life test with `n` exponential(lambda) lifetimes
/// drawn by inverse CDF.
pub fn draw_life_test<R: Rng + ?Sized>(
    lambda: f64,
    scheme: &Scheme,
    rng: &mut R,
) -> LifeTestOutcome {
    let n = scheme.n();
    let tau = scheme.tau();
    let mut times: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.sample(Open01);
            -u.ln() / lambda
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let within = times.partition_point(|&x| x <= tau);
    match *scheme {
        Scheme::Hybrid { r, .. } if within >= r && r > 0 => {
            times.truncate(r);
            let duration = times[r - 1];
            LifeTestOutcome {
                n,
                failures: times,
                duration,
            }
        }
        _ => {
            times.truncate(within);
            LifeTestOutcome {
                n,
                failures: times,
                duration: tau,
            }
        }
    }
}

/// Realised loss of one test and decision when the true rate is `lambda`.
pub fn loss_of(
    outcome: &LifeTestOutcome,
    decision: Decision,
    lambda: f64,
    costs: &CostModel,
    g: &AcceptanceCost,
) -> f64 {
    let n = outcome.n as f64;
    let survivors = (outcome.n - outcome.m()) as f64;
    let terminal = match decision {
        Decision::Accept => g.eval(lambda),
        Decision::Reject => costs.c_reject,
    };
    n * costs.c_sample - survivors * costs.salvage + outcome.duration * costs.c_time + terminal
}

/// Law of the rate estimate given the true rate: an atom at zero (no
/// failures) plus a density supported on `[1 / (n tau), inf)`.
#[derive(Debug, Clone)]
pub struct EstimatorLaw {
    n: usize,
    tau: f64,
    lambda: f64,
    entries: Vec<Entry>,
}

impl EstimatorLaw {
    pub fn new(scheme: Scheme, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "failure rate must be positive, got {lambda}"
            )));
        }
        let (n, tau) = (scheme.n(), scheme.tau());
        if n == 0 || !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(
                "estimator law needs n >= 1 and a finite tau > 0".into(),
            ));
        }
        if let Scheme::Hybrid { r, .. } = scheme {
            if !(1..=n).contains(&r) {
                return Err(Error::InvalidParameter(format!(
                    "need 1 <= r <= n, got r {r}"
                )));
            }
        }
        Ok(Self {
            n,
            tau,
            lambda,
            entries: scheme.entries(),
        })
    }

    /// `P(no failures) = exp(-n lambda tau)`.
    pub fn point_mass_at_zero(&self) -> f64 {
        (-(self.n as f64) * self.lambda * self.tau).exp()
    }

    pub fn lower_support(&self) -> f64 {
        1.0 / (self.n as f64 * self.tau)
    }

    /// `P(lambda_hat >= y, at least one failure)` for `y > 0`.
    fn continuous_tail(&self, y: f64) -> f64 {
        let u = (1.0 / y).min(self.n as f64 * self.tau);
        let mut s = CompensatedSum::default();
        for e in &self.entries {
            let mf = e.m as f64;
            let arg = self.lambda * (mf * u - e.k as f64 * self.tau);
            if arg <= 0.0 {
                continue;
            }
            let g = reg_lower_gamma(mf, arg).expect("shape and argument are positive");
            s.add(e.coef * (-self.lambda * e.k as f64 * self.tau).exp() * g);
        }
        s.value()
    }

    /// Probability of rejecting at threshold `zeta`, `P(lambda_hat >= zeta)`.
    pub fn reject_probability(&self, zeta: f64) -> f64 {
        if zeta == 0.0 {
            return 1.0;
        }
        if zeta.is_infinite() {
            return 0.0;
        }
        self.continuous_tail(zeta).clamp(0.0, 1.0)
    }

    /// CDF of the estimate conditional on at least one failure.
    pub fn continuous_cdf(&self, y: f64) -> f64 {
        if y < self.lower_support() {
            return 0.0;
        }
        let p = self.point_mass_at_zero();
        (1.0 - self.continuous_tail(y) / (1.0 - p)).clamp(0.0, 1.0)
    }

    /// Density of the estimate conditional on at least one failure.
    pub fn density(&self, y: f64) -> f64 {
        if !(y > 0.0) || y.is_infinite() {
            return 0.0;
        }
        let p = self.point_mass_at_zero();
        let mut s = CompensatedSum::default();
        for e in &self.entries {
            let mf = e.m as f64;
            let shift = e.k as f64 * self.tau / mf;
            let pdf = gamma_pdf_unchecked(1.0 / y - shift, mf, mf * self.lambda);
            if pdf > 0.0 {
                s.add(e.coef * (-self.lambda * e.k as f64 * self.tau).exp() * pdf);
            }
        }
        (s.value() / (y * y * (1.0 - p))).max(0.0)
    }
}
