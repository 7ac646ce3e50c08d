//! Bounded grid search for optimum plans.
//!
//! For each sample size (and stopping count) the search scans the `(tau, zeta)`
//! grid. Cells whose lower bound
//!
//! ```text
//! n (c_sample - salvage) + salvage E[M] + c_time E[duration] + E[min(g(lambda), c_reject)]
//! ```
//! already exceeds the incumbent are skipped. The last term is the risk of
//! deciding with the true rate known, so the bound holds for every `zeta`.
//! Both expectations grow with `tau`, so the bound is monotone in `tau` and
//! the scan for one `n` ends at the first `tau` it prunes. The sample-size loop
//! ends once the bound at the smallest `tau` prunes.
//!
//! Each evaluation carries an estimated rounding error. A cell may become the
//! incumbent only if that error is within [`ROUNDING_TOLERANCE`]; noisier cells
//! are discarded only when their value minus the error bound still exceeds the
//! final optimum. Anything else is counted as uncertified.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{
    bucket_sum, hybrid_entries, survival_powers, type1_entries, Entry, ThresholdKernel,
    TERM_RELATIVE_ERROR,
};
use crate::model::{AcceptanceCost, CostModel, HybridPlan, Plan, Type1Plan};
use crate::parallel::map_indices;
use crate::risk_hybrid::{failure_buckets, plateau_buckets, stopped_duration};
use crate::risk_type1::{ROUNDING_TOLERANCE, STABILITY_CAP};
use crate::specfun::{reg_lower_gamma, reg_upper_gamma, GammaPrior};

/// Grid resolution and limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub zeta_step: f64,
    pub tau_step: f64,
    pub zeta_cap: f64,
    /// tail probability defining the largest test time scanned
    pub alpha: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            zeta_step: 0.0125,
            tau_step: 0.0125,
            zeta_cap: 6.0,
            alpha: 0.01,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.zeta_step > 0.0
            && self.tau_step > 0.0
            && self.zeta_cap >= self.zeta_step
            && self.zeta_step.is_finite()
            && self.tau_step.is_finite()
            && self.zeta_cap.is_finite()
            && self.alpha > 0.0
            && self.alpha < 1.0;
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid grid {self:?}")));
        }
        Ok(())
    }

    fn zeta_count(&self) -> usize {
        (self.zeta_cap / self.zeta_step + 1e-9).floor() as usize
    }

    fn zeta_at(&self, i: usize) -> f64 {
        grid_point(i, self.zeta_step)
    }

    fn tau_at(&self, i: usize) -> f64 {
        grid_point(i, self.tau_step)
    }
}

/// `i * step`, computed as `i / k` when `step = 1/k` for an integer `k` so
/// that points like 0.725 come out correctly rounded.
fn grid_point(i: usize, step: f64) -> f64 {
    let k = (1.0 / step).round();
    if k >= 1.0 && (k * step - 1.0).abs() < 1e-12 {
        i as f64 / k
    } else {
        i as f64 * step
    }
}

/// Behaviour beyond the plain grid scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// number of runner-up plans (best of other sample sizes) to report
    pub runner_ups: usize,
    /// keep the best plan of every scanned `(n[, r])`
    pub scan_log: bool,
    /// stop at the stability cap, or skip cells whose rounding error is too
    /// large, instead of failing; the report records that it happened
    pub allow_truncation: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            runner_ups: 5,
            scan_log: false,
            allow_truncation: false,
        }
    }
}

/// Finite bounds on the optimum: `n_max` from the sampling cost, `tau_max`
/// from the time cost (or the lifetime quantile when time is free) and the
/// `zeta` cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBounds {
    pub n_max: usize,
    pub tau_max: f64,
    pub zeta_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub plan: Plan,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumReport {
    pub plan: Plan,
    pub risk: f64,
    pub rounding_error: f64,
    pub runner_ups: Vec<Candidate>,
    pub scan_log: Option<Vec<Candidate>>,
    pub bounds: SearchBounds,
    /// number of `(n[, r], tau, zeta)` cells evaluated
    pub evaluations: u64,
    /// largest sample size scanned
    pub n_scanned: usize,
    /// the scan stopped at the stability cap before the bounds closed
    pub truncated: bool,
    /// cells skipped because their rounding error could hide a better plan
    pub uncertified_cells: u64,
    /// the optimum sits on the largest test time scanned
    pub tau_at_boundary: bool,
}

impl OptimumReport {
    /// True when the optimum is certified over the whole bounded grid.
    pub fn is_certified(&self) -> bool {
        !self.truncated && self.uncertified_cells == 0
    }
}

/// `tau` with `P(X > tau) = alpha` under the marginal lifetime law.
pub fn tau_alpha(prior: &GammaPrior, alpha: f64) -> Result<f64> {
    prior.lifetime_quantile(alpha)
}

/// Sample-size and test-time bounds for Type-I plans. `probe_risk` is the
/// risk of any known plan (infinity if none).
pub fn bounds_type1(
    costs: &CostModel,
    g: &AcceptanceCost,
    prior: &GammaPrior,
    probe_risk: f64,
    grid: &GridSpec,
) -> Result<SearchBounds> {
    grid.validate()?;
    let net = costs.net_sample();
    if !(net > 0.0) {
        return Err(Error::Unbounded(format!(
            "sampling cost {} does not exceed the salvage value {}",
            costs.c_sample, costs.salvage
        )));
    }
    let cap = costs
        .c_reject
        .min(g.prior_expectation(prior))
        .min(probe_risk);
    let tau_max = if costs.c_time > 0.0 {
        cap / costs.c_time
    } else {
        tau_alpha(prior, grid.alpha)?
    };
    Ok(SearchBounds {
        n_max: (cap / net + 1e-9).floor() as usize,
        tau_max,
        zeta_max: grid.zeta_cap,
    })
}

/// Sample-size bound for hybrid plans; test times run up to the lifetime quantile.
pub fn bounds_hybrid(
    costs: &CostModel,
    g: &AcceptanceCost,
    prior: &GammaPrior,
    probe_risk: f64,
    grid: &GridSpec,
) -> Result<SearchBounds> {
    let b = bounds_type1(costs, g, prior, probe_risk, grid)?;
    Ok(SearchBounds {
        tau_max: tau_alpha(prior, grid.alpha)?,
        ..b
    })
}

/// `E[min(g(lambda), c_reject)]`, the Bayes risk of deciding with the rate
/// known and no testing cost. No plan can do better.
pub fn perfect_information_risk(costs: &CostModel, g: &AcceptanceCost, prior: &GammaPrior) -> f64 {
    let cr = costs.c_reject;
    if g.eval(0.0) >= cr {
        return cr;
    }
    let grows = g.terms().iter().any(|t| t.exponent > 0.0 && t.coef > 0.0);
    if !grows {
        return g.prior_expectation(prior);
    }
    let mut hi = 1.0;
    while g.eval(hi) < cr {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g.eval(mid) < cr {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let x = prior.rate * 0.5 * (lo + hi);
    let mut total = cr * reg_upper_gamma(prior.shape, x).expect("positive shape");
    for t in g.terms() {
        let mu = prior.moment(t.exponent).expect("nonnegative exponent");
        total +=
            t.coef * mu * reg_lower_gamma(prior.shape + t.exponent, x).expect("positive shape");
    }
    total
}

/// Optimum Type-I plan on the grid.
pub fn optimize_type1(
    costs: &CostModel,
    g: &AcceptanceCost,
    prior: &GammaPrior,
    grid: &GridSpec,
) -> Result<OptimumReport> {
    optimize_type1_with(costs, g, prior, grid, &SearchOptions::default())
}

/// Optimum hybrid plan on the grid.
pub fn optimize_hybrid(
    costs: &CostModel,
    g: &AcceptanceCost,
    prior: &GammaPrior,
    grid: &GridSpec,
) -> Result<OptimumReport> {
    optimize_hybrid_with(costs, g, prior, grid, &SearchOptions::default())
}

pub fn optimize_type1_with(
    costs: &CostModel,
    g: &AcceptanceCost,
    prior: &GammaPrior,
    grid: &GridSpec,
    opts: &SearchOptions,
) -> Result<OptimumReport> {
    Search::new(costs, g, prior, grid, opts, false)?.run()
}

pub fn optimize_hybrid_with(
    costs: &CostModel,
    g: &AcceptanceCost,
    prior: &GammaPrior,
    grid: &GridSpec,
    opts: &SearchOptions,
) -> Result<OptimumReport> {
    Search::new(costs, g, prior, grid, opts, true)?.run()
}

/// One `(n[, r])` block: everything that does not depend on `tau`.
struct Block {
    n: usize,
    r: Option<usize>,
    entries: Vec<Entry>,
    failures: Vec<i128>,
    plateau: Vec<i128>,
}

impl Block {
    fn new(n: usize, r: Option<usize>) -> Block {
        match r {
            None => Block {
                n,
                r,
                entries: type1_entries(n),
                failures: failure_buckets(n, n),
                plateau: Vec::new(),
            },
            Some(r) => Block {
                n,
                r: Some(r),
                entries: hybrid_entries(n, r),
                failures: failure_buckets(n, r),
                plateau: plateau_buckets(n, r),
            },
        }
    }

    /// Sampling, salvage and time costs at `tau`, with their rounding error.
    fn fixed_part(&self, c: &CostModel, prior: &GammaPrior, tau: f64) -> (f64, f64) {
        let f = survival_powers(prior, tau, self.n);
        let failures = bucket_sum(&self.failures, &f);
        let (duration, dur_mag) = match self.r {
            None => (tau, 0.0),
            Some(r) => {
                let (stopped, mag) = stopped_duration(self.n, r, tau, prior);
                (stopped + tau * bucket_sum(&self.plateau, &f), mag)
            }
        };
        let value = self.n as f64 * c.net_sample() + failures * c.salvage + duration * c.c_time;
        (value, dur_mag * TERM_RELATIVE_ERROR * c.c_time)
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    tau_idx: usize,
    zeta_idx: usize,
    risk: f64,
    err: f64,
}

#[derive(Debug, Default)]
struct BlockResult {
    best: Option<Cell>,
    evaluations: u64,
    /// (value minus error bound, error bound) of noisy cells not yet excluded
    uncertified: Vec<(f64, f64)>,
    last_tau_idx: usize,
}

struct Search<'a> {
    costs: &'a CostModel,
    prior: &'a GammaPrior,
    grid: &'a GridSpec,
    opts: &'a SearchOptions,
    hybrid: bool,
    kernel: ThresholdKernel,
    acceptance: f64,
    floor: f64,
    bounds: SearchBounds,
    bounded_n: bool,
    tau_count: usize,
}

impl<'a> Search<'a> {
    fn new(
        costs: &'a CostModel,
        g: &'a AcceptanceCost,
        prior: &'a GammaPrior,
        grid: &'a GridSpec,
        opts: &'a SearchOptions,
        hybrid: bool,
    ) -> Result<Self> {
        grid.validate()?;
        let acceptance = g.prior_expectation(prior);
        let computed = if hybrid {
            bounds_hybrid(costs, g, prior, f64::INFINITY, grid)
        } else {
            bounds_type1(costs, g, prior, f64::INFINITY, grid)
        };
        let (bounds, bounded_n) = match computed {
            Ok(b) => (b, true),
            Err(Error::Unbounded(_)) if opts.allow_truncation => {
                let tau_max = tau_alpha(prior, grid.alpha)?;
                (
                    SearchBounds {
                        n_max: usize::MAX,
                        tau_max,
                        zeta_max: grid.zeta_cap,
                    },
                    false,
                )
            }
            Err(e) => return Err(e),
        };
        let tau_limit = if hybrid {
            bounds.tau_max
        } else {
            bounds.tau_max.min(tau_alpha(prior, grid.alpha)?)
        };
        let tau_count = (tau_limit / grid.tau_step + 1e-9).floor() as usize;
        Ok(Self {
            costs,
            prior,
            grid,
            opts,
            hybrid,
            kernel: ThresholdKernel::new(costs, g, prior, STABILITY_CAP)?,
            acceptance,
            floor: perfect_information_risk(costs, g, prior),
            bounds,
            bounded_n,
            tau_count,
        })
    }

    fn plan(&self, n: usize, r: Option<usize>, tau: f64, zeta: f64) -> Plan {
        if self.hybrid {
            Plan::Hybrid(HybridPlan {
                n,
                r: r.unwrap_or(0),
                tau,
                zeta,
            })
        } else {
            Plan::Type1(Type1Plan { n, tau, zeta })
        }
    }

    fn block(&self, n: usize, r: Option<usize>) -> Block {
        Block::new(n, r)
    }

    fn fixed_part(&self, b: &Block, tau: f64) -> (f64, f64) {
        b.fixed_part(self.costs, self.prior, tau)
    }

    fn scan_cell(
        &self,
        b: &Block,
        tau_idx: usize,
        fixed: (f64, f64),
        incumbent: f64,
    ) -> BlockResult {
        let tau = self.grid.tau_at(tau_idx);
        let slice = self.kernel.slice(b.n, tau, &b.entries);
        let base = fixed.0 + self.acceptance;
        let mut out = BlockResult {
            last_tau_idx: tau_idx,
            ..Default::default()
        };
        let nz = self.grid.zeta_count();
        // below 1 / (n tau) the estimator cut is clamped and the value repeats
        let clamp = 1.0 / (b.n as f64 * tau);
        let mut clamped = None;
        for zi in 1..=nz {
            let zeta = self.grid.zeta_at(zi);
            let th = match clamped {
                Some(th) if zeta <= clamp => th,
                _ => self.kernel.eval(&slice, zeta),
            };
            if zeta <= clamp {
                clamped = Some(th);
            }
            let risk = base + th.value;
            let err = fixed.1 + th.rounding_error() + 4.0 * f64::EPSILON * risk.abs();
            out.evaluations += 1;
            if err > ROUNDING_TOLERANCE {
                if risk - err <= incumbent {
                    out.uncertified.push((risk - err, err));
                }
                continue;
            }
            if out.best.map_or(true, |c| risk < c.risk) {
                out.best = Some(Cell {
                    tau_idx,
                    zeta_idx: zi,
                    risk,
                    err,
                });
            }
        }
        out
    }

    fn scan_block(&self, b: &Block, incumbent: f64) -> BlockResult {
        // lower bound is monotone in tau: find the last index worth scanning
        let mut fixed = Vec::new();
        for ti in 1..=self.tau_count {
            let fp = self.fixed_part(b, self.grid.tau_at(ti));
            if fp.0 + self.floor > incumbent + 1e-9 {
                break;
            }
            fixed.push(fp);
        }
        let cells: Vec<BlockResult> = map_indices(fixed.len(), |i| {
            self.scan_cell(b, i + 1, fixed[i], incumbent)
        });
        let mut out = BlockResult::default();
        for c in cells {
            out.evaluations += c.evaluations;
            out.uncertified.extend(c.uncertified);
            out.last_tau_idx = out.last_tau_idx.max(c.last_tau_idx);
            if let Some(cell) = c.best {
                if out.best.map_or(true, |cur| cell.risk < cur.risk) {
                    out.best = Some(cell);
                }
            }
        }
        out
    }

    fn run(&self) -> Result<OptimumReport> {
        let c = self.costs;
        let mut best = Candidate {
            plan: self.plan(0, None, 0.0, 0.0),
            risk: c.c_reject,
        };
        let mut best_err = 0.0;
        if self.acceptance < best.risk {
            best = Candidate {
                plan: self.plan(0, None, 0.0, f64::INFINITY),
                risk: self.acceptance,
            };
        }
        let mut log: Vec<Candidate> = Vec::new();
        let mut uncertified: Vec<(f64, f64)> = Vec::new();
        let mut evaluations = 0u64;
        let mut truncated = false;
        let mut n_scanned = 0;
        let mut tau_at_boundary = false;
        let net = c.net_sample();
        let mut n = 1usize;
        loop {
            let smallest_tau = self.grid.tau_at(1);
            if n as f64 * net + smallest_tau * c.c_time * f64::from(!self.hybrid) + self.floor
                > best.risk + 1e-9
            {
                break;
            }
            if self.bounded_n && n > self.bounds.n_max {
                break;
            }
            if n > STABILITY_CAP {
                if self.opts.allow_truncation {
                    truncated = true;
                    break;
                }
                return Err(Error::StabilityCap {
                    n,
                    cap: STABILITY_CAP,
                });
            }
            n_scanned = n;
            let rs: Vec<Option<usize>> = if self.hybrid {
                (1..=n).map(Some).collect()
            } else {
                vec![None]
            };
            for r in rs {
                let block = self.block(n, r);
                let res = self.scan_block(&block, best.risk);
                evaluations += res.evaluations;
                uncertified.extend(res.uncertified);
                if let Some(cell) = res.best {
                    let cand = Candidate {
                        plan: self.plan(
                            n,
                            r,
                            self.grid.tau_at(cell.tau_idx),
                            self.grid.zeta_at(cell.zeta_idx),
                        ),
                        risk: cell.risk,
                    };
                    log.push(cand);
                    if cell.risk < best.risk {
                        best = cand;
                        best_err = cell.err;
                        tau_at_boundary = cell.tau_idx == self.tau_count;
                    }
                }
            }
            n += 1;
        }
        let open: Vec<f64> = uncertified
            .iter()
            .filter(|(low, _)| *low <= best.risk)
            .map(|(_, err)| *err)
            .collect();
        let uncertified_cells = open.len() as u64;
        if uncertified_cells > 0 && !self.opts.allow_truncation {
            let estimate = open.iter().copied().fold(0.0, f64::max);
            return Err(Error::Unstable {
                estimate,
                tolerance: ROUNDING_TOLERANCE,
            });
        }
        let mut runner_ups: Vec<Candidate> = log
            .iter()
            .filter(|cand| cand.plan != best.plan)
            .copied()
            .collect();
        runner_ups.sort_by(|a, b| a.risk.total_cmp(&b.risk));
        runner_ups.truncate(self.opts.runner_ups);
        Ok(OptimumReport {
            plan: best.plan,
            risk: best.risk,
            rounding_error: best_err,
            runner_ups,
            scan_log: self.opts.scan_log.then_some(log),
            bounds: self.bounds,
            evaluations,
            n_scanned,
            truncated,
            uncertified_cells,
            tau_at_boundary,
        })
    }
}

/// Bayes risks over a `(tau, zeta)` grid for one sample size (and stopping
/// count), row-major with one row per `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSurface {
    pub taus: Vec<f64>,
    pub zetas: Vec<f64>,
    /// `NaN` where the rounding error exceeds [`ROUNDING_TOLERANCE`]
    pub risks: Vec<f64>,
}

impl RiskSurface {
    pub fn at(&self, tau_idx: usize, zeta_idx: usize) -> f64 {
        self.risks[tau_idx * self.zetas.len() + zeta_idx]
    }
}

/// Evaluates the Bayes risk on every grid point. `r = None` is Type-I.
pub fn risk_surface(
    n: usize,
    r: Option<usize>,
    costs: &CostModel,
    g: &AcceptanceCost,
    prior: &GammaPrior,
    taus: &[f64],
    zetas: &[f64],
) -> Result<RiskSurface> {
    if n > STABILITY_CAP {
        return Err(Error::StabilityCap {
            n,
            cap: STABILITY_CAP,
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter(
            "a risk surface needs n >= 1".into(),
        ));
    }
    if let Some(r) = r {
        HybridPlan::new(n, r, 0.0, 0.0)?;
    }
    if taus.iter().chain(zetas).any(|x| !(*x >= 0.0)) || taus.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter(
            "grid values must be nonnegative and test times finite".into(),
        ));
    }
    let kernel = ThresholdKernel::new(costs, g, prior, n)?;
    let block = Block::new(n, r);
    let acceptance = g.prior_expectation(prior);
    let rows = map_indices(taus.len(), |i| {
        let tau = taus[i];
        let fixed = block.fixed_part(costs, prior, tau);
        let slice = kernel.slice(n, tau, &block.entries);
        zetas
            .iter()
            .map(|&zeta| {
                let th = kernel.eval(&slice, zeta);
                let risk = fixed.0 + acceptance + th.value;
                let err = fixed.1 + th.rounding_error() + 4.0 * f64::EPSILON * risk.abs();
                if err > ROUNDING_TOLERANCE {
                    f64::NAN
                } else {
                    risk
                }
            })
            .collect::<Vec<f64>>()
    });
    Ok(RiskSurface {
        taus: taus.to_vec(),
        zetas: zetas.to_vec(),
        risks: rows.concat(),
    })
}
