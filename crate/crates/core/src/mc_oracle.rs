//! Monte Carlo estimates of the closed-form quantities.
//!
//! Trial `t` draws from its own ChaCha8 stream (`set_stream(t)` under the
//! configured seed), so a trial's numbers do not depend on which worker ran
//! it. Trials are reduced per batch in trial order and batches are merged in
//! batch order, which makes every estimate bit-identical for a given seed
//! regardless of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    decide, draw_life_test, lambda_hat_hybrid, lambda_hat_type1, loss_of, AcceptanceCost,
    CostModel, LifeTestOutcome, Plan, Scheme,
};
use crate::parallel::map_indices;
use crate::specfun::GammaPrior;

pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    /// trials per reduction block
    pub batch: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            batch: 8192,
        }
    }
}

impl McConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.batch == 0 {
            return Err(Error::InvalidParameter(
                "trials and batch size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Sample mean with its standard error `sd / sqrt(trials)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

impl McEstimate {
    /// Distance from `value` in standard errors. A zero-variance estimate
    /// that hits `value` exactly gives 0.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (self.mean - value).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }

    pub fn agrees_with(&self, value: f64, sigmas: f64) -> bool {
        self.z_score(value) <= sigmas
    }
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *o;
            return;
        }
        let n = (self.count + o.count) as f64;
        let d = o.mean - self.mean;
        self.mean += d * o.count as f64 / n;
        self.m2 += o.m2 + d * d * self.count as f64 * o.count as f64 / n;
        self.count += o.count;
    }

    fn estimate(&self) -> McEstimate {
        let var = if self.count > 1 {
            self.m2 / (self.count - 1) as f64
        } else {
            0.0
        };
        McEstimate {
            mean: self.mean,
            std_error: (var.max(0.0) / self.count as f64).sqrt(),
            trials: self.count,
        }
    }
}

/// Runs `trial` once per trial index and returns one estimate per output slot.
pub(crate) fn run_trials<const K: usize, F>(mc: &McConfig, trial: F) -> Result<[McEstimate; K]>
where
    F: Fn(&mut ChaCha8Rng) -> [f64; K] + Sync + Send,
{
    mc.validate()?;
    let base = ChaCha8Rng::seed_from_u64(mc.seed);
    let blocks = mc.trials.div_ceil(mc.batch);
    let partial = map_indices(blocks as usize, |bi| {
        let start = bi as u64 * mc.batch;
        let end = (start + mc.batch).min(mc.trials);
        let mut acc = [Moments::default(); K];
        for t in start..end {
            let mut rng = base.clone();
            rng.set_stream(t);
            let xs = trial(&mut rng);
            for (a, x) in acc.iter_mut().zip(xs) {
                a.push(x);
            }
        }
        acc
    });
    let mut total = [Moments::default(); K];
    for block in &partial {
        for (t, b) in total.iter_mut().zip(block) {
            t.merge(b);
        }
    }
    Ok(total.map(|m| m.estimate()))
}

pub(crate) fn prior_sampler(prior: &GammaPrior) -> Result<Gamma<f64>> {
    Gamma::new(prior.shape, 1.0 / prior.rate)
        .map_err(|e| Error::InvalidParameter(format!("prior sampler: {e}")))
}

/// A prior rate draw, kept away from zero so the lifetimes stay finite.
pub(crate) fn draw_rate<R: Rng + ?Sized>(sampler: &Gamma<f64>, rng: &mut R) -> f64 {
    sampler.sample(rng).max(f64::MIN_POSITIVE)
}

pub(crate) fn estimate_for(plan: &Plan, outcome: &LifeTestOutcome) -> f64 {
    let r = match plan {
        Plan::Type1(p) => lambda_hat_type1(outcome, p.tau),
        Plan::Hybrid(p) => lambda_hat_hybrid(outcome, p.r, p.tau),
    };
    r.expect("simulated outcomes follow the censoring rule")
}

/// Bayes risk of a decision plan by simulation: rate from the prior, a life
/// test, the estimator's decision and the realised loss.
pub fn simulate_dsp_risk(
    plan: &Plan,
    costs: &CostModel,
    g: &AcceptanceCost,
    prior: &GammaPrior,
    mc: &McConfig,
) -> Result<McEstimate> {
    validate_plan(plan)?;
    let sampler = prior_sampler(prior)?;
    let scheme = plan.scheme();
    let [risk] = run_trials(mc, |rng| {
        let lambda = draw_rate(&sampler, rng);
        let outcome = draw_life_test(lambda, &scheme, rng);
        let decision = decide(estimate_for(plan, &outcome), plan.zeta());
        [loss_of(&outcome, decision, lambda, costs, g)]
    })?;
    Ok(risk)
}

/// Empirical `P(lambda_hat >= zeta | lambda)`.
pub fn simulate_tail_probability(lambda: f64, plan: &Plan, mc: &McConfig) -> Result<McEstimate> {
    validate_plan(plan)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "rate {lambda} must be positive and finite"
        )));
    }
    let scheme = plan.scheme();
    let [p] = run_trials(mc, |rng| {
        let outcome = draw_life_test(lambda, &scheme, rng);
        [f64::from(estimate_for(plan, &outcome) >= plan.zeta())]
    })?;
    Ok(p)
}

/// Prior-averaged number of failures and test duration.
pub fn simulate_moments(
    scheme: &Scheme,
    prior: &GammaPrior,
    mc: &McConfig,
) -> Result<(McEstimate, McEstimate)> {
    if let Scheme::Hybrid { n, r, .. } = *scheme {
        if r == 0 && n > 0 || r > n {
            return Err(Error::InvalidParameter(format!(
                "stopping count {r} outside 1..={n}"
            )));
        }
    }
    let sampler = prior_sampler(prior)?;
    let [m, d] = run_trials(mc, |rng| {
        let lambda = draw_rate(&sampler, rng);
        let outcome = draw_life_test(lambda, scheme, rng);
        [outcome.m() as f64, outcome.duration]
    })?;
    Ok((m, d))
}

pub(crate) fn validate_plan(plan: &Plan) -> Result<()> {
    match plan {
        Plan::Type1(p) => p.validate(),
        Plan::Hybrid(p) => p.validate(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Type1Plan;

    #[test]
    fn merging_matches_one_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.5).collect();
        let mut one = Moments::default();
        xs.iter().for_each(|&x| one.push(x));
        let mut merged = Moments::default();
        for chunk in xs.chunks(77) {
            let mut m = Moments::default();
            chunk.iter().for_each(|&x| m.push(x));
            merged.merge(&m);
        }
        assert!((one.mean - merged.mean).abs() < 1e-12);
        assert!((one.m2 - merged.m2).abs() < 1e-8 * one.m2);
    }

    #[test]
    fn batch_size_does_not_change_trials() {
        let plan = Plan::Type1(Type1Plan::new(3, 0.725, 2.975).unwrap());
        let a = simulate_tail_probability(
            1.0,
            &plan,
            &McConfig {
                trials: 5000,
                seed: 9,
                batch: 100,
            },
        )
        .unwrap();
        let b = simulate_tail_probability(
            1.0,
            &plan,
            &McConfig {
                trials: 5000,
                seed: 9,
                batch: 4096,
            },
        )
        .unwrap();
        assert!((a.mean - b.mean).abs() < 1e-15);
    }

    #[test]
    fn zero_threshold_always_rejects() {
        let plan = Plan::Type1(Type1Plan::new(2, 0.5, 0.0).unwrap());
        let p = simulate_tail_probability(0.7, &plan, &McConfig::new(1000, 1)).unwrap();
        assert_eq!(p.mean, 1.0);
        assert_eq!(p.std_error, 0.0);
    }

    #[test]
    fn zero_trials_is_rejected() {
        let plan = Plan::Type1(Type1Plan::new(2, 0.5, 1.0).unwrap());
        assert!(simulate_tail_probability(1.0, &plan, &McConfig::new(0, 1)).is_err());
    }
}
