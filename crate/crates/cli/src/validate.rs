//! Self-check suite: closed forms against simulation, moment identities,
//! the quadratic decision root and the bounds on an optimum.

use lifeplan::bsp_ref::bsp_threshold;
use lifeplan::mc_oracle::{
    simulate_dsp_risk, simulate_moments, simulate_tail_probability, McConfig,
};
use lifeplan::model::{AcceptanceCost, CostModel, CostTerm, HybridPlan, Plan, Scheme, Type1Plan};
use lifeplan::risk_hybrid::{
    expected_duration_hybrid, expected_failures_hybrid, tail_probability_hybrid,
};
use lifeplan::risk_type1::{expected_failures_type1, tail_probability_type1};
use lifeplan::specfun::GammaPrior;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::{bound_violations, evaluate, optimize, Output, RunOptions, QUICK_TRIALS};
use crate::config::{RunConfig, SchemeKind};
use crate::error::{CliError, Result};
use crate::report;

/// Randomized plans per scheme.
pub const DEFAULT_PLANS: usize = 50;
pub const QUICK_PLANS: usize = 10;
/// Agreement band for simulated quantities, in standard errors.
pub const SIGMAS: f64 = 3.0;
/// Largest sample size of a randomized plan.
pub const MAX_RANDOM_N: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

/// A cost setting the randomized plans are checked under.
struct Setting {
    label: &'static str,
    costs: CostModel,
    g: AcceptanceCost,
    prior: GammaPrior,
}

fn settings(cfg: &RunConfig) -> Result<Vec<Setting>> {
    let std_costs = CostModel::new(0.5, 0.5, 30.0, 0.2)?;
    let prior = GammaPrior::new(2.5, 0.8)?;
    Ok(vec![
        Setting {
            label: "config",
            costs: cfg.costs()?,
            g: cfg.acceptance()?,
            prior: cfg.prior()?,
        },
        Setting {
            label: "quadratic",
            costs: std_costs,
            g: AcceptanceCost::quadratic(2.0, 2.0, 2.0)?,
            prior,
        },
        Setting {
            label: "fifth-degree",
            costs: CostModel {
                c_reject: 125.0,
                ..std_costs
            },
            g: AcceptanceCost::polynomial(&[2.0; 6])?,
            prior: GammaPrior::new(1.5, 0.8)?,
        },
        Setting {
            label: "fractional",
            costs: std_costs,
            g: AcceptanceCost::new(vec![
                CostTerm {
                    coef: 2.0,
                    exponent: 0.0,
                },
                CostTerm {
                    coef: 2.0,
                    exponent: 1.0,
                },
                CostTerm {
                    coef: 2.0,
                    exponent: 2.5,
                },
            ])?,
            prior,
        },
    ])
}

fn random_plan(rng: &mut ChaCha8Rng, scheme: SchemeKind) -> Result<Plan> {
    let n = rng.random_range(1..=MAX_RANDOM_N);
    let tau = rng.random_range(0.05..2.0);
    let zeta = rng.random_range(0.1..5.0);
    Ok(match scheme {
        SchemeKind::Type1 => Plan::Type1(Type1Plan::new(n, tau, zeta)?),
        SchemeKind::Hybrid => Plan::Hybrid(HybridPlan::new(n, rng.random_range(1..=n), tau, zeta)?),
    })
}

fn plan_label(p: &Plan) -> String {
    match p {
        Plan::Type1(p) => format!("n={} tau={:.4} zeta={:.4}", p.n, p.tau, p.zeta),
        Plan::Hybrid(p) => format!("n={} r={} tau={:.4} zeta={:.4}", p.n, p.r, p.tau, p.zeta),
    }
}

/// Runs every check. Simulation seeds derive from `cfg.mc.seed`.
pub fn run_suite(cfg: &RunConfig, run: &RunOptions) -> Result<Vec<Check>> {
    let offset = cfg.validate.closed_form_offset;
    let plans = match (cfg.validate.plans, run.quick) {
        (0, true) => QUICK_PLANS,
        (0, false) => DEFAULT_PLANS,
        (k, _) => k,
    };
    let trials = if run.quick {
        cfg.mc.trials.min(QUICK_TRIALS)
    } else {
        cfg.mc.trials
    };
    let seed = cfg.mc.seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stream = 0u64;
    let mut next_mc = || {
        stream += 1;
        McConfig::new(
            trials,
            seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        )
    };
    let settings = settings(cfg)?;
    let mut out = Vec::new();

    for scheme in [SchemeKind::Type1, SchemeKind::Hybrid] {
        for i in 0..plans {
            let s = &settings[i % settings.len()];
            let plan = random_plan(&mut rng, scheme)?;
            let label = plan_label(&plan);
            let closed = evaluate(&plan, &s.costs, &s.g, &s.prior)?.total + offset;
            let est = simulate_dsp_risk(&plan, &s.costs, &s.g, &s.prior, &next_mc())?;
            out.push(check(
                format!("risk-vs-simulation/{}/{}", scheme.label(), s.label),
                est.agrees_with(closed, SIGMAS),
                format!(
                    "{label}: closed {closed:.6} simulated {:.6} se {:.6} z {:.2}",
                    est.mean,
                    est.std_error,
                    est.z_score(closed)
                ),
            ));
            match plan {
                Plan::Type1(p) => {
                    let em = expected_failures_type1(p.n, p.tau, &s.prior) + offset;
                    let b = s.prior.rate;
                    let identity = p.n as f64 * (1.0 - (b / (b + p.tau)).powf(s.prior.shape));
                    out.push(check(
                        "expected-failures-identity/type1",
                        (em - identity).abs() <= 1e-9,
                        format!("{label}: double sum {em:.12} identity {identity:.12}"),
                    ));
                }
                Plan::Hybrid(p) => {
                    let em = expected_failures_hybrid(p.n, p.r, p.tau, &s.prior) + offset;
                    let ed = expected_duration_hybrid(p.n, p.r, p.tau, &s.prior) + offset;
                    let (m, d) = simulate_moments(&plan.scheme(), &s.prior, &next_mc())?;
                    out.push(check(
                        "expected-failures-vs-simulation/hybrid",
                        m.agrees_with(em, SIGMAS),
                        format!(
                            "{label}: closed {em:.6} simulated {:.6} z {:.2}",
                            m.mean,
                            m.z_score(em)
                        ),
                    ));
                    out.push(check(
                        "expected-duration-vs-simulation/hybrid",
                        d.agrees_with(ed, SIGMAS),
                        format!(
                            "{label}: closed {ed:.6} simulated {:.6} z {:.2}",
                            d.mean,
                            d.z_score(ed)
                        ),
                    ));
                }
            }
        }
    }

    // operating characteristic at a few rates
    for scheme in [SchemeKind::Type1, SchemeKind::Hybrid] {
        let plan = random_plan(&mut rng, scheme)?;
        for lambda in [0.25, 1.0, 2.5] {
            let closed = match plan {
                Plan::Type1(p) => tail_probability_type1(p.n, p.tau, p.zeta, lambda)?,
                Plan::Hybrid(p) => tail_probability_hybrid(p.n, p.r, p.tau, p.zeta, lambda)?,
            } + offset;
            let est = simulate_tail_probability(lambda, &plan, &next_mc())?;
            out.push(check(
                format!("tail-probability-vs-simulation/{}", scheme.label()),
                (0.0..=1.0).contains(&closed) && est.agrees_with(closed, SIGMAS),
                format!(
                    "{} lambda={lambda}: closed {closed:.6} simulated {:.6} z {:.2}",
                    plan_label(&plan),
                    est.mean,
                    est.z_score(closed)
                ),
            ));
        }
    }

    out.extend(quadratic_root_checks(offset)?);
    out.extend(optimum_checks(cfg, run)?);
    Ok(out)
}

/// The bisection cutoff of the Bayes rule against the closed-form root of
/// `a0 + a1 k/y + a2 k(k+1)/y^2 = Cr`, `k = m + a`.
fn quadratic_root_checks(offset: f64) -> Result<Vec<Check>> {
    let costs = CostModel::new(0.5, 0.5, 30.0, 0.0)?;
    let (a0, a1, a2) = (2.0, 2.0, 2.0);
    let g = AcceptanceCost::quadratic(a0, a1, a2)?;
    let prior = GammaPrior::new(2.5, 0.8)?;
    let scheme = Scheme::Type1 { n: 10, tau: 50.0 };
    let mut out = Vec::new();
    for m in 0..=scheme.max_failures() {
        let k = m as f64 + prior.shape;
        let e = costs.c_reject - a0;
        let root =
            (a1 * k + (a1 * a1 * k * k + 4.0 * e * a2 * k * (k + 1.0)).sqrt()) / (2.0 * e) + offset;
        let got = bsp_threshold(m, &scheme, &costs, &g, &prior)?.root;
        out.push(check(
            "bayes-rule-quadratic-root",
            (got - root).abs() <= 1e-8,
            format!("m={m}: bisection {got:.12} algebraic {root:.12}"),
        ));
    }
    Ok(out)
}

/// Bounds on the configured optimum. `--quick` coarsens the grid fourfold.
fn optimum_checks(cfg: &RunConfig, run: &RunOptions) -> Result<Vec<Check>> {
    let mut cfg = cfg.clone();
    if run.quick {
        cfg.grid.tau_step *= 4.0;
        cfg.grid.zeta_step *= 4.0;
    }
    cfg.search.allow_truncation = true;
    let rep = optimize(&cfg, &cfg.search_options(false))?;
    let mut rep = rep;
    rep.risk += cfg.validate.closed_form_offset;
    let violations = bound_violations(&cfg, &rep)?;
    let p = rep.plan;
    let detail = if violations.is_empty() {
        format!(
            "n={} r={} tau={} zeta={} risk {:.6}",
            p.n(),
            report::opt(p.r()),
            p.tau(),
            p.zeta(),
            rep.risk
        )
    } else {
        violations.join("; ")
    };
    Ok(vec![check(
        format!("optimum-bounds/{}", cfg.scheme.label()),
        violations.is_empty(),
        detail,
    )])
}

/// `check,status,detail` rows; any failure gives exit code 1.
pub fn cmd_validate(cfg: &RunConfig, run: &RunOptions) -> Result<Output> {
    let checks = run_suite(cfg, run)?;
    let mut t = report::Table::new(&["check", "status", "detail"])?;
    for c in &checks {
        t.row([
            c.name.as_str(),
            if c.passed { "pass" } else { "fail" },
            c.detail.as_str(),
        ])?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let failure = (failed > 0)
        .then(|| CliError::Invariant(format!("{failed} of {} checks failed", checks.len())));
    Ok(Output {
        csv: t.finish()?,
        failure,
    })
}
