use std::path::Path;
use std::process::{Command, Output};

use lifeplan_cli::config::{PlanConfig, RunConfig, SchemeKind, Threshold};

fn lifeplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lifeplan"))
        .args(args)
        .output()
        .unwrap()
}

fn with_config(cfg: &RunConfig, dir: &Path, args: &[&str]) -> Output {
    let path = dir.join("run.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--config", path.to_str().unwrap()]);
    lifeplan(&all)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn standard_plan() -> RunConfig {
    let mut cfg = RunConfig::standard(SchemeKind::Type1);
    cfg.plan = Some(PlanConfig {
        n: 3,
        r: None,
        tau: 0.725,
        zeta: Threshold(2.975),
    });
    cfg
}

#[test]
fn risk_row_ends_with_the_rounded_risk() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_config(&standard_plan(), dir.path(), &["risk"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("scheme,n,r,tau,zeta,sampling,salvage,time,acceptance,threshold"));
    assert!(lines.next().unwrap().ends_with(",25.2777"));
}

#[test]
fn empty_test_costs_the_rejection() {
    let o = lifeplan(&["risk", "--n", "0", "--tau", "0", "--zeta", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).trim_end().ends_with(",30.0000"));
}

#[test]
fn infinite_threshold_in_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = standard_plan();
    cfg.plan.as_mut().unwrap().zeta = Threshold(f64::INFINITY);
    let o = with_config(&cfg, dir.path(), &["risk"]);
    assert_eq!(o.status.code(), Some(0));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[4], "inf");
    // always accepting: threshold part vanishes
    assert_eq!(fields[9].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn simulated_columns_are_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["risk", "--mc", "--quick", "--seed", "11"];
    let a = with_config(&standard_plan(), dir.path(), &args);
    let b = with_config(&standard_plan(), dir.path(), &args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text
        .lines()
        .next()
        .unwrap()
        .ends_with("mc_mean,mc_std_error,mc_trials"));
    assert!(text.lines().nth(1).unwrap().ends_with(",100000"));
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = standard_plan()
        .to_json()
        .replace("\"rate\": 0.8", "\"rate\": -0.8");
    std::fs::write(&path, text).unwrap();
    let o = lifeplan(&["risk", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(lifeplan(&["reproduce", "T99"]).status.code(), Some(2));
}

#[test]
fn oversized_sample_exits_3() {
    let o = lifeplan(&["risk", "--n", "31", "--tau", "0.5", "--zeta", "2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(o.stdout.is_empty());
}

#[test]
fn zero_rejection_cost_rejects_without_testing() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::standard(SchemeKind::Type1);
    cfg.costs.reject = 0.0;
    let o = with_config(&cfg, dir.path(), &["optimize"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let best = stdout(&o).lines().nth(1).unwrap().to_string();
    let f: Vec<&str> = best.split(',').collect();
    assert_eq!(f[2], "0");
    assert_eq!(f[5], "0.0");
    assert_eq!(f[12], "0.0000");
}

#[test]
fn optimize_writes_scan_log_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("scan.csv");
    let out = dir.path().join("best.csv");
    let o = lifeplan(&[
        "optimize",
        "--scan-log",
        log.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let best = std::fs::read_to_string(out).unwrap();
    assert!(best
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("0,type1,3,,0.725,2.975,"));
    let scan = std::fs::read_to_string(log).unwrap();
    assert_eq!(scan.lines().next().unwrap(), "n,r,tau,zeta,risk_full,risk");
    assert!(scan.lines().any(|l| l.starts_with("3,,0.725,2.975,")));
}

#[test]
fn validate_negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::standard(SchemeKind::Type1);
    cfg.validate.closed_form_offset = 0.5;
    cfg.validate.plans = 4;
    let o = with_config(&cfg, dir.path(), &["validate", "--quick"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().any(|l| l.contains(",fail,")));
}

#[test]
fn validate_quick_passes() {
    let o = lifeplan(&["validate", "--quick"]);
    let text = stdout(&o);
    let failed: Vec<&str> = text.lines().filter(|l| l.contains(",fail,")).collect();
    assert_eq!(o.status.code(), Some(0), "{failed:?}");
    assert!(text.lines().count() > 40);
}

#[test]
fn table_listing_shows_aliases() {
    let o = lifeplan(&["reproduce", "--list"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text
        .lines()
        .any(|l| l.starts_with("quint-hybrid-ab,T3,hybrid,")));
    assert_eq!(text.lines().count(), 26);
}

#[test]
fn paper_rows_are_marked() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t1.csv");
    let o = lifeplan(&["reproduce", "T1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text
        .lines()
        .any(|l| l.starts_with("T1,a=2.5;b=0.8,paper,LAM,3,,0.7077,0.3539,threshold is xi,")));
    assert!(text.lines().any(
        |l| l.starts_with("T1,a=2.5;b=0.8,computed,DSP,4,,1.3125,") && l.ends_with(",24.8419")
    ));
}
