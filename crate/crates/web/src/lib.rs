//! WebAssembly bindings for the browser demo in `www/`.
//!
//! A [`Setting`] holds the prior, costs and acceptance cost. Plans are passed
//! as `(n, r, tau, zeta)` with `r` absent for Type-I plans.

use lifeplan::error::Error;
use lifeplan::model::{AcceptanceCost, CostModel, CostTerm, HybridPlan, Plan, Type1Plan};
use lifeplan::risk_hybrid::{bayes_risk_hybrid, tail_probability_hybrid};
use lifeplan::risk_type1::{bayes_risk_type1, tail_probability_type1, RiskBreakdown};
use lifeplan::search::risk_surface;
use lifeplan::specfun::GammaPrior;
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, Error>;

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Setting {
    costs: CostModel,
    g: AcceptanceCost,
    prior: GammaPrior,
}

fn plan_of(n: usize, r: Option<u32>, tau: f64, zeta: f64) -> Result<Plan> {
    Ok(match r {
        None => Plan::Type1(Type1Plan::new(n, tau, zeta)?),
        Some(r) => Plan::Hybrid(HybridPlan::new(n, r as usize, tau, zeta)?),
    })
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `count` evenly spaced points in `(0, max]`.
fn axis(max: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|i| max * i as f64 / count as f64).collect()
}

impl Setting {
    pub fn try_new(
        shape: f64,
        rate: f64,
        costs: [f64; 4],
        coefs: &[f64],
        exponents: &[f64],
    ) -> Result<Self> {
        if coefs.len() != exponents.len() {
            return Err(Error::InvalidParameter(format!(
                "{} coefficients for {} exponents",
                coefs.len(),
                exponents.len()
            )));
        }
        let terms = coefs
            .iter()
            .zip(exponents)
            .map(|(&coef, &exponent)| CostTerm { coef, exponent })
            .collect();
        Ok(Self {
            costs: CostModel::new(costs[0], costs[1], costs[2], costs[3])?,
            g: AcceptanceCost::new(terms)?,
            prior: GammaPrior::new(shape, rate)?,
        })
    }

    pub fn breakdown(
        &self,
        n: usize,
        r: Option<u32>,
        tau: f64,
        zeta: f64,
    ) -> Result<RiskBreakdown> {
        match plan_of(n, r, tau, zeta)? {
            Plan::Type1(p) => bayes_risk_type1(&p, &self.costs, &self.g, &self.prior),
            Plan::Hybrid(p) => bayes_risk_hybrid(&p, &self.costs, &self.g, &self.prior),
        }
    }

    pub fn surface_values(
        &self,
        n: usize,
        r: Option<u32>,
        tau_max: f64,
        zeta_max: f64,
        steps: usize,
    ) -> Result<Vec<f64>> {
        if steps == 0 || steps > 400 {
            return Err(Error::InvalidParameter(format!(
                "grid steps {steps} outside 1..=400"
            )));
        }
        let s = risk_surface(
            n,
            r.map(|r| r as usize),
            &self.costs,
            &self.g,
            &self.prior,
            &axis(tau_max, steps),
            &axis(zeta_max, steps),
        )?;
        Ok(s.risks)
    }

    pub fn acceptance_curve(
        &self,
        n: usize,
        r: Option<u32>,
        tau: f64,
        zeta: f64,
        lambda_max: f64,
        points: usize,
    ) -> Result<Vec<f64>> {
        let plan = plan_of(n, r, tau, zeta)?;
        axis(lambda_max, points)
            .into_iter()
            .map(|lambda| {
                let reject = match plan {
                    Plan::Type1(p) => tail_probability_type1(p.n, p.tau, p.zeta, lambda)?,
                    Plan::Hybrid(p) => tail_probability_hybrid(p.n, p.r, p.tau, p.zeta, lambda)?,
                };
                Ok(1.0 - reject)
            })
            .collect()
    }
}

#[wasm_bindgen]
impl Setting {
    /// `costs` is `[sample, time, reject, salvage]`; the acceptance cost is
    /// `sum coefs[i] * lambda^exponents[i]`.
    #[wasm_bindgen(constructor)]
    pub fn new(
        shape: f64,
        rate: f64,
        costs: Vec<f64>,
        coefs: Vec<f64>,
        exponents: Vec<f64>,
    ) -> std::result::Result<Setting, JsError> {
        let c: [f64; 4] = costs
            .try_into()
            .map_err(|_| JsError::new("costs must have four entries"))?;
        Self::try_new(shape, rate, c, &coefs, &exponents).map_err(js)
    }

    /// `[risk, sampling, salvage, time, acceptance, threshold,
    /// expected_failures, expected_duration, rounding_error]`
    pub fn evaluate(
        &self,
        n: usize,
        r: Option<u32>,
        tau: f64,
        zeta: f64,
    ) -> std::result::Result<Vec<f64>, JsError> {
        let b = self.breakdown(n, r, tau, zeta).map_err(js)?;
        Ok(vec![
            b.total,
            b.sampling,
            b.salvage,
            b.time,
            b.acceptance,
            b.threshold,
            b.expected_failures,
            b.expected_duration,
            b.rounding_error,
        ])
    }

    /// Risks on a `steps x steps` grid, one row per test time, `NaN` where
    /// the value is not trustworthy.
    pub fn surface(
        &self,
        n: usize,
        r: Option<u32>,
        tau_max: f64,
        zeta_max: f64,
        steps: usize,
    ) -> std::result::Result<Vec<f64>, JsError> {
        self.surface_values(n, r, tau_max, zeta_max, steps)
            .map_err(js)
    }

    /// Probability of accepting at `points` rates up to `lambda_max`.
    #[wasm_bindgen(js_name = operatingCharacteristic)]
    pub fn operating_characteristic(
        &self,
        n: usize,
        r: Option<u32>,
        tau: f64,
        zeta: f64,
        lambda_max: f64,
        points: usize,
    ) -> std::result::Result<Vec<f64>, JsError> {
        self.acceptance_curve(n, r, tau, zeta, lambda_max, points)
            .map_err(js)
    }
}
