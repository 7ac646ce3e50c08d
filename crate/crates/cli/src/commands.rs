//! `risk`, `optimize` and `reproduce`.

use lifeplan::bsp_ref::compare_with_plan_mc;
use lifeplan::mc_oracle::{simulate_dsp_risk, McConfig, McEstimate};
use lifeplan::model::{AcceptanceCost, CostModel, Plan};
use lifeplan::risk_hybrid::bayes_risk_hybrid;
use lifeplan::risk_type1::{bayes_risk_type1, RiskBreakdown};
use lifeplan::search::{optimize_hybrid_with, optimize_type1_with, OptimumReport, SearchOptions};
use lifeplan::specfun::GammaPrior;

use crate::catalog::{PublishedPlan, Table};
use crate::config::{RunConfig, SchemeKind};
use crate::error::{CliError, Result};
use crate::report::{self, fmt4, full, opt, opt4, opt_full};

/// Trials used by `--quick`.
pub const QUICK_TRIALS: u64 = 100_000;

/// Flags shared by every command.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub mc: bool,
    pub quick: bool,
}

/// CSV text plus the error that decides the exit code, if any. The CSV is
/// written even when the run fails a check.
#[derive(Debug)]
pub struct Output {
    pub csv: String,
    pub failure: Option<CliError>,
}

impl Output {
    pub fn ok(csv: String) -> Self {
        Self { csv, failure: None }
    }

    pub fn exit_code(&self) -> i32 {
        self.failure.as_ref().map_or(0, CliError::exit_code)
    }
}

pub fn evaluate(
    plan: &Plan,
    costs: &CostModel,
    g: &AcceptanceCost,
    prior: &GammaPrior,
) -> Result<RiskBreakdown> {
    Ok(match plan {
        Plan::Type1(p) => bayes_risk_type1(p, costs, g, prior)?,
        Plan::Hybrid(p) => bayes_risk_hybrid(p, costs, g, prior)?,
    })
}

pub fn optimize(cfg: &RunConfig, opts: &SearchOptions) -> Result<OptimumReport> {
    let (costs, g, prior, grid) = (cfg.costs()?, cfg.acceptance()?, cfg.prior()?, cfg.grid());
    Ok(match cfg.scheme {
        SchemeKind::Type1 => optimize_type1_with(&costs, &g, &prior, &grid, opts)?,
        SchemeKind::Hybrid => optimize_hybrid_with(&costs, &g, &prior, &grid, opts)?,
    })
}

fn mc_config(cfg: &RunConfig, run: &RunOptions) -> McConfig {
    let mut mc = cfg.mc();
    if run.quick {
        mc.trials = mc.trials.min(QUICK_TRIALS);
    }
    mc
}

pub const RISK_HEADER: [&str; 15] = [
    "scheme",
    "n",
    "r",
    "tau",
    "zeta",
    "sampling",
    "salvage",
    "time",
    "acceptance",
    "threshold",
    "expected_failures",
    "expected_duration",
    "rounding_error",
    "risk_full",
    "risk",
];

/// Itemized risk of the configured plan, with a simulated check on request.
pub fn cmd_risk(cfg: &RunConfig, run: &RunOptions) -> Result<Output> {
    let plan = cfg.plan()?;
    let (costs, g, prior) = (cfg.costs()?, cfg.acceptance()?, cfg.prior()?);
    let b = evaluate(&plan, &costs, &g, &prior)?;
    let mut header: Vec<&str> = RISK_HEADER.to_vec();
    if run.mc {
        header.extend(["mc_mean", "mc_std_error", "mc_trials"]);
    }
    let mut t = report::Table::new(&header)?;
    let mut row = vec![
        cfg.scheme.label().to_string(),
        plan.n().to_string(),
        opt(plan.r()),
        full(plan.tau()),
        full(plan.zeta()),
        full(b.sampling),
        full(b.salvage),
        full(b.time),
        full(b.acceptance),
        full(b.threshold),
        full(b.expected_failures),
        full(b.expected_duration),
        full(b.rounding_error),
        full(b.total),
        fmt4(b.total),
    ];
    if run.mc {
        let est = simulate_dsp_risk(&plan, &costs, &g, &prior, &mc_config(cfg, run))?;
        row.extend([full(est.mean), full(est.std_error), est.trials.to_string()]);
    }
    t.row(row)?;
    Ok(Output::ok(t.finish()?))
}

/// Violations of the risk bounds every optimum must satisfy, empty if none.
pub fn bound_violations(cfg: &RunConfig, rep: &OptimumReport) -> Result<Vec<String>> {
    let (costs, g, prior) = (cfg.costs()?, cfg.acceptance()?, cfg.prior()?);
    let slack = rep.rounding_error + 1e-9;
    let mut out = Vec::new();
    let cap = costs.c_reject.min(g.prior_expectation(&prior));
    if rep.risk > cap + slack {
        out.push(format!("risk {} exceeds min(Cr, E[g]) = {}", rep.risk, cap));
    }
    let p = rep.plan;
    let floor = p.n() as f64 * costs.net_sample() + p.tau() * costs.c_time;
    if floor > rep.risk + slack {
        out.push(format!(
            "n(Cs - rs) + tau Ct = {floor} exceeds risk {}",
            rep.risk
        ));
    }
    if let Some(r) = p.r() {
        if r > p.n() {
            out.push(format!("stopping count {r} exceeds sample size {}", p.n()));
        }
    }
    Ok(out)
}

pub const OPTIMIZE_HEADER: [&str; 13] = [
    "rank",
    "scheme",
    "n",
    "r",
    "tau",
    "zeta",
    "rounding_error",
    "certified",
    "truncated",
    "tau_at_boundary",
    "evaluations",
    "risk_full",
    "risk",
];

/// The optimum, its runner-ups and, on request, the best plan of every
/// scanned sample size. Bound violations give exit code 1.
pub fn cmd_optimize(cfg: &RunConfig, want_scan_log: bool) -> Result<(Output, Option<String>)> {
    let rep = optimize(cfg, &cfg.search_options(want_scan_log))?;
    let mut t = report::Table::new(&OPTIMIZE_HEADER)?;
    let scheme = cfg.scheme.label();
    t.row([
        "0".to_string(),
        scheme.to_string(),
        rep.plan.n().to_string(),
        opt(rep.plan.r()),
        full(rep.plan.tau()),
        full(rep.plan.zeta()),
        full(rep.rounding_error),
        rep.is_certified().to_string(),
        rep.truncated.to_string(),
        rep.tau_at_boundary.to_string(),
        rep.evaluations.to_string(),
        full(rep.risk),
        fmt4(rep.risk),
    ])?;
    for (i, c) in rep.runner_ups.iter().enumerate() {
        t.row([
            (i + 1).to_string(),
            scheme.to_string(),
            c.plan.n().to_string(),
            opt(c.plan.r()),
            full(c.plan.tau()),
            full(c.plan.zeta()),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            full(c.risk),
            fmt4(c.risk),
        ])?;
    }
    let scan = match (&rep.scan_log, want_scan_log) {
        (Some(log), true) => {
            let mut s = report::Table::new(&["n", "r", "tau", "zeta", "risk_full", "risk"])?;
            for c in log {
                s.row([
                    c.plan.n().to_string(),
                    opt(c.plan.r()),
                    full(c.plan.tau()),
                    full(c.plan.zeta()),
                    full(c.risk),
                    fmt4(c.risk),
                ])?;
            }
            Some(s.finish()?)
        }
        _ => None,
    };
    let violations = bound_violations(cfg, &rep)?;
    let failure = if violations.is_empty() {
        None
    } else {
        Some(CliError::Invariant(violations.join("; ")))
    };
    let failure = failure.or_else(|| {
        (!rep.is_certified()).then(|| {
            CliError::Stability(format!(
                "optimum not certified (scanned to n = {}, {} uncertified cells)",
                rep.n_scanned, rep.uncertified_cells
            ))
        })
    });
    Ok((
        Output {
            csv: t.finish()?,
            failure,
        },
        scan,
    ))
}

/// How a regenerated optimum came out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Certified,
    /// the scan hit the stability cap before its bounds closed
    Truncated,
    /// some cells were too noisy to rule out
    Uncertified,
}

impl RowStatus {
    pub fn label(self) -> &'static str {
        match self {
            RowStatus::Certified => "certified",
            RowStatus::Truncated => "truncated",
            RowStatus::Uncertified => "uncertified",
        }
    }

    fn of(rep: &OptimumReport) -> Self {
        if rep.truncated {
            RowStatus::Truncated
        } else if rep.uncertified_cells > 0 {
            RowStatus::Uncertified
        } else {
            RowStatus::Certified
        }
    }
}

/// One regenerated table row.
#[derive(Debug, Clone)]
pub struct ReproducedRow {
    pub label: String,
    pub published: PublishedPlan,
    pub computed: std::result::Result<(OptimumReport, RowStatus), String>,
    /// closed-form risk of the published plan, when it has one
    pub published_plan_risk: Option<f64>,
    /// simulated risk of the computed optimum
    pub dsp_mc: Option<McEstimate>,
    /// simulated risk of the Bayes decision rule on the computed design, with
    /// the optimum's loss on the same draws as control variate
    pub bsp_mc: Option<McEstimate>,
}

fn published_plan(scheme: SchemeKind, p: &PublishedPlan) -> Option<Plan> {
    use lifeplan::model::{HybridPlan, Type1Plan};
    let (n, tau, zeta) = (p.n?, p.tau?, p.zeta?);
    match scheme {
        SchemeKind::Type1 => Type1Plan::new(n, tau, zeta).ok().map(Plan::Type1),
        SchemeKind::Hybrid => HybridPlan::new(n, p.r?, tau, zeta).ok().map(Plan::Hybrid),
    }
}

/// Regenerates every row of `table`. Rows whose search fails keep the error.
pub fn reproduce_rows(
    table: &Table,
    run: &RunOptions,
    seed: Option<u64>,
) -> Result<Vec<ReproducedRow>> {
    let mut rows = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let mut cfg = table.config(row)?;
        if let Some(s) = seed {
            cfg.mc.seed = s;
        }
        cfg.search.allow_truncation = true;
        cfg.search.runner_ups = 0;
        let (costs, g, prior) = (cfg.costs()?, cfg.acceptance()?, cfg.prior()?);
        let computed = match optimize(&cfg, &cfg.search_options(false)) {
            Ok(rep) => {
                let status = RowStatus::of(&rep);
                Ok((rep, status))
            }
            Err(e) => Err(e.to_string()),
        };
        let published_plan_risk = published_plan(table.scheme, &row.dsp)
            .and_then(|p| evaluate(&p, &costs, &g, &prior).ok())
            .map(|b| b.total);
        let (mut dsp_mc, mut bsp_mc) = (None, None);
        if run.mc {
            if let Ok((rep, _)) = &computed {
                let mc = mc_config(&cfg, run);
                let pair = compare_with_plan_mc(&rep.plan, &costs, &g, &prior, &mc)?;
                dsp_mc = Some(pair.dsp);
                bsp_mc = Some(pair.bsp_controlled(rep.risk));
            }
        }
        rows.push(ReproducedRow {
            label: row.label(),
            published: row.dsp.clone(),
            computed,
            published_plan_risk,
            dsp_mc,
            bsp_mc,
        });
    }
    Ok(rows)
}

pub const REPRODUCE_HEADER: [&str; 13] = [
    "table",
    "row",
    "source",
    "method",
    "n",
    "r",
    "tau",
    "zeta",
    "status",
    "std_error",
    "delta_vs_paper",
    "risk_full",
    "risk",
];

/// Computed, simulated and published rows of one table. Truncated,
/// uncertified or failed rows give exit code 3 after the CSV is written.
pub fn cmd_reproduce(table: &Table, run: &RunOptions, seed: Option<u64>) -> Result<Output> {
    let rows = reproduce_rows(table, run, seed)?;
    let mut t = report::Table::new(&REPRODUCE_HEADER)?;
    let mut bad = Vec::new();
    for (row, src) in rows.iter().zip(&table.rows) {
        let base = |source: &str, method: &str| {
            vec![
                table.id.clone(),
                row.label.clone(),
                source.to_string(),
                method.to_string(),
            ]
        };
        match &row.computed {
            Ok((rep, status)) => {
                let mut f = base("computed", "DSP");
                f.extend([
                    rep.plan.n().to_string(),
                    opt(rep.plan.r()),
                    full(rep.plan.tau()),
                    full(rep.plan.zeta()),
                    status.label().to_string(),
                    String::new(),
                    full(rep.risk - row.published.risk),
                    full(rep.risk),
                    fmt4(rep.risk),
                ]);
                t.row(f)?;
                if *status != RowStatus::Certified {
                    bad.push(format!("{} {}", row.label, status.label()));
                }
            }
            Err(e) => {
                let mut f = base("computed", "DSP");
                f.extend(vec![String::new(); 4]);
                f.extend([
                    format!("error: {e}"),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
                t.row(f)?;
                bad.push(format!("{} failed: {e}", row.label));
            }
        }
        if let Some(v) = row.published_plan_risk {
            let p = &row.published;
            let mut f = base("computed", "DSP-published-plan");
            f.extend([
                opt(p.n),
                opt(p.r),
                opt_full(p.tau),
                opt_full(p.zeta),
                "closed-form".to_string(),
                String::new(),
                full(v - p.risk),
                full(v),
                fmt4(v),
            ]);
            t.row(f)?;
        }
        for (method, est) in [("DSP", row.dsp_mc), ("BSP", row.bsp_mc)] {
            if let (Some(e), Ok((rep, _))) = (est, &row.computed) {
                let mut f = base("simulated", method);
                f.extend([
                    rep.plan.n().to_string(),
                    opt(rep.plan.r()),
                    full(rep.plan.tau()),
                    if method == "DSP" {
                        full(rep.plan.zeta())
                    } else {
                        String::new()
                    },
                    format!("trials={}", e.trials),
                    full(e.std_error),
                    full(e.mean - row.published.risk),
                    full(e.mean),
                    fmt4(e.mean),
                ]);
                t.row(f)?;
            }
        }
        let mut paper = vec![("DSP", &src.dsp, None)];
        paper.extend(
            src.others
                .iter()
                .map(|o| (o.method.as_str(), &o.plan, o.note.as_deref())),
        );
        for (method, p, note) in paper {
            let mut f = base("paper", method);
            f.extend([
                opt(p.n),
                opt(p.r),
                opt_full(p.tau),
                opt_full(p.zeta),
                note.unwrap_or("published").to_string(),
                String::new(),
                String::new(),
                full(p.risk),
                opt4(Some(p.risk)),
            ]);
            t.row(f)?;
        }
    }
    let failure = (!bad.is_empty()).then(|| {
        CliError::Stability(format!(
            "rows without a certified optimum: {}",
            bad.join(", ")
        ))
    });
    Ok(Output {
        csv: t.finish()?,
        failure,
    })
}

/// `id,aliases,scheme,rows,title` for every bundled table.
pub fn cmd_list() -> Result<Output> {
    let mut t = report::Table::new(&["id", "aliases", "scheme", "rows", "title"])?;
    for tab in crate::catalog::tables() {
        t.row([
            tab.id.clone(),
            tab.aliases.join(" "),
            tab.scheme.label().to_string(),
            tab.rows.len().to_string(),
            tab.title.clone(),
        ])?;
    }
    Ok(Output::ok(t.finish()?))
}
