//! Versioned JSON run configuration.

use std::path::Path;

use lifeplan::mc_oracle::{McConfig, DEFAULT_SEED, DEFAULT_TRIALS};
use lifeplan::model::{AcceptanceCost, CostModel, CostTerm, HybridPlan, Plan, Type1Plan};
use lifeplan::search::{GridSpec, SearchOptions};
use lifeplan::specfun::GammaPrior;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Type1,
    Hybrid,
}

impl SchemeKind {
    pub fn label(self) -> &'static str {
        match self {
            SchemeKind::Type1 => "type1",
            SchemeKind::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub shape: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub sample: f64,
    pub time: f64,
    pub reject: f64,
    #[serde(default)]
    pub salvage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub coef: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_step")]
    pub zeta_step: f64,
    #[serde(default = "default_step")]
    pub tau_step: f64,
    #[serde(default = "default_zeta_cap")]
    pub zeta_cap: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_step() -> f64 {
    GridSpec::default().zeta_step
}
fn default_zeta_cap() -> f64 {
    GridSpec::default().zeta_cap
}
fn default_alpha() -> f64 {
    GridSpec::default().alpha
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            zeta_step: g.zeta_step,
            tau_step: g.tau_step,
            zeta_cap: g.zeta_cap,
            alpha: g.alpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
        }
    }
}

/// A threshold that may be `"inf"` (never reject).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold(pub f64);

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Threshold(x)),
            Raw::Text(t) if t == "inf" => Ok(Threshold(f64::INFINITY)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "threshold must be a number or \"inf\", got {t:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    pub tau: f64,
    pub zeta: Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    #[serde(default = "default_runner_ups")]
    pub runner_ups: usize,
    /// stop at the stability cap instead of failing
    #[serde(default)]
    pub allow_truncation: bool,
}

fn default_runner_ups() -> usize {
    SearchOptions::default().runner_ups
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            runner_ups: default_runner_ups(),
            allow_truncation: false,
        }
    }
}

/// Test fixture hooks for the validation suite.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    /// added to every closed-form value before it is compared; a nonzero
    /// value must make the suite fail
    #[serde(default)]
    pub closed_form_offset: f64,
    /// randomized plans per scheme; 0 means the suite default
    #[serde(default)]
    pub plans: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub scheme: SchemeKind,
    pub prior: PriorConfig,
    pub costs: CostConfig,
    pub acceptance: Vec<TermConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanConfig>,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The standard Type-I setting with quadratic acceptance cost.
    pub fn standard(scheme: SchemeKind) -> Self {
        let costs = match scheme {
            SchemeKind::Type1 => CostConfig {
                sample: 0.5,
                time: 0.5,
                reject: 30.0,
                salvage: 0.0,
            },
            SchemeKind::Hybrid => CostConfig {
                sample: 0.5,
                time: 5.0,
                reject: 30.0,
                salvage: 0.3,
            },
        };
        RunConfig {
            version: SCHEMA_VERSION,
            scheme,
            prior: PriorConfig {
                shape: 2.5,
                rate: 0.8,
            },
            costs,
            acceptance: (0..3)
                .map(|i| TermConfig {
                    coef: 2.0,
                    exponent: i as f64,
                })
                .collect(),
            grid: GridConfig::default(),
            mc: McSection::default(),
            plan: None,
            search: SearchConfig::default(),
            validate: ValidateConfig::default(),
            output: None,
        }
    }

    /// Validates every model precondition up front.
    pub fn check(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        self.prior()?;
        self.costs()?;
        self.acceptance()?;
        self.grid().validate()?;
        if self.mc.trials == 0 {
            return Err(CliError::Config("mc.trials must be positive".into()));
        }
        if self.plan.is_some() {
            self.plan()?;
        }
        Ok(())
    }

    pub fn prior(&self) -> Result<GammaPrior> {
        Ok(GammaPrior::new(self.prior.shape, self.prior.rate)?)
    }

    pub fn costs(&self) -> Result<CostModel> {
        let c = self.costs;
        Ok(CostModel::new(c.sample, c.time, c.reject, c.salvage)?)
    }

    pub fn acceptance(&self) -> Result<AcceptanceCost> {
        Ok(AcceptanceCost::new(
            self.acceptance
                .iter()
                .map(|t| CostTerm {
                    coef: t.coef,
                    exponent: t.exponent,
                })
                .collect(),
        )?)
    }

    pub fn grid(&self) -> GridSpec {
        let g = self.grid;
        GridSpec {
            zeta_step: g.zeta_step,
            tau_step: g.tau_step,
            zeta_cap: g.zeta_cap,
            alpha: g.alpha,
        }
    }

    pub fn mc(&self) -> McConfig {
        McConfig::new(self.mc.trials, self.mc.seed)
    }

    pub fn search_options(&self, scan_log: bool) -> SearchOptions {
        SearchOptions {
            runner_ups: self.search.runner_ups,
            scan_log,
            allow_truncation: self.search.allow_truncation,
        }
    }

    pub fn plan(&self) -> Result<Plan> {
        let p = self
            .plan
            .ok_or_else(|| CliError::Config("this command needs a \"plan\" section".into()))?;
        let plan = match (self.scheme, p.r) {
            (SchemeKind::Type1, None) => Plan::Type1(Type1Plan::new(p.n, p.tau, p.zeta.0)?),
            (SchemeKind::Type1, Some(_)) => {
                return Err(CliError::Config(
                    "a Type-I plan has no stopping count r".into(),
                ))
            }
            (SchemeKind::Hybrid, Some(r)) => {
                Plan::Hybrid(HybridPlan::new(p.n, r, p.tau, p.zeta.0)?)
            }
            (SchemeKind::Hybrid, None) if p.n == 0 => {
                Plan::Hybrid(HybridPlan::new(0, 0, p.tau, p.zeta.0)?)
            }
            (SchemeKind::Hybrid, None) => {
                return Err(CliError::Config(
                    "a hybrid plan needs a stopping count r".into(),
                ))
            }
        };
        Ok(plan)
    }

    /// Sets a parameter by its table column name.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "a" => self.prior.shape = value,
            "b" => self.prior.rate = value,
            "Cs" => self.costs.sample = value,
            "Ct" => self.costs.time = value,
            "Cr" => self.costs.reject = value,
            "rs" => self.costs.salvage = value,
            _ => {
                let idx: usize = key
                    .strip_prefix('a')
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| CliError::Config(format!("unknown parameter {key:?}")))?;
                let term = self
                    .acceptance
                    .get_mut(idx)
                    .ok_or_else(|| CliError::Config(format!("no acceptance term {idx}")))?;
                term.coef = value;
            }
        }
        Ok(())
    }
}
