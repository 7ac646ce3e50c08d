//! Bundled published tables: the settings of every row, the published
//! optimum and any comparison plans printed beside it.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::config::{CostConfig, PriorConfig, RunConfig, SchemeKind, TermConfig, SCHEMA_VERSION};
use crate::error::{CliError, Result};

const TABLES_JSON: &str = include_str!("../data/tables.json");

#[derive(Debug, Clone, Deserialize)]
struct Bundle {
    version: u32,
    tables: Vec<Table>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Base {
    pub prior: [f64; 2],
    pub costs: CostConfig,
    pub acceptance: Vec<[f64; 2]>,
}

/// A published plan and its risk.
#[derive(Debug, Clone, Deserialize)]
pub struct PublishedPlan {
    pub risk: f64,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub r: Option<usize>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub zeta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Comparison {
    pub method: String,
    #[serde(flatten)]
    pub plan: PublishedPlan,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Row {
    /// parameters changed from the table's base setting
    pub set: BTreeMap<String, f64>,
    pub dsp: PublishedPlan,
    #[serde(default)]
    pub others: Vec<Comparison>,
}

impl Row {
    /// `key=value` pairs in a fixed order, e.g. `a=2.5;b=0.8`.
    pub fn label(&self) -> String {
        let mut keys: Vec<&String> = self.set.keys().collect();
        keys.sort_by_key(|k| (key_rank(k), k.as_str()));
        keys.iter()
            .map(|k| format!("{k}={}", self.set[*k]))
            .collect::<Vec<_>>()
            .join(";")
    }
}

fn key_rank(k: &str) -> u8 {
    match k {
        "a" => 0,
        "b" => 1,
        _ => 2,
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct Table {
    pub id: String,
    pub aliases: Vec<String>,
    pub title: String,
    pub scheme: SchemeKind,
    pub base: Base,
    pub rows: Vec<Row>,
}

impl Table {
    /// Run configuration of one row.
    pub fn config(&self, row: &Row) -> Result<RunConfig> {
        let mut cfg = RunConfig::standard(self.scheme);
        cfg.version = SCHEMA_VERSION;
        cfg.prior = PriorConfig {
            shape: self.base.prior[0],
            rate: self.base.prior[1],
        };
        cfg.costs = self.base.costs;
        cfg.acceptance = self
            .base
            .acceptance
            .iter()
            .map(|t| TermConfig {
                coef: t[0],
                exponent: t[1],
            })
            .collect();
        for (k, v) in &row.set {
            cfg.set(k, *v)?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn matches(&self, id: &str) -> bool {
        self.id.eq_ignore_ascii_case(id) || self.aliases.iter().any(|a| a.eq_ignore_ascii_case(id))
    }
}

pub fn tables() -> &'static [Table] {
    static CELL: OnceLock<Vec<Table>> = OnceLock::new();
    CELL.get_or_init(|| {
        let b: Bundle = serde_json::from_str(TABLES_JSON).expect("bundled tables parse");
        assert_eq!(b.version, 1, "bundled tables version");
        b.tables
    })
}

pub fn find(id: &str) -> Result<&'static Table> {
    tables()
        .iter()
        .find(|t| t.matches(id))
        .ok_or_else(|| CliError::UnknownTable(id.to_string()))
}
