use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lifeplan_cli::catalog;
use lifeplan_cli::commands::{cmd_list, cmd_optimize, cmd_reproduce, cmd_risk, Output, RunOptions};
use lifeplan_cli::config::{PlanConfig, RunConfig, SchemeKind, Threshold};
use lifeplan_cli::error::{CliError, Result};
use lifeplan_cli::validate::cmd_validate;

/// Bayes risks and optimum sampling plans for censored exponential life tests.
///
/// Exit codes: 0 ok, 1 invariant violation, 2 validation failure,
/// 3 stability limit reached.
#[derive(Parser, Debug)]
#[command(name = "lifeplan", version)]
struct Cli {
    /// JSON run configuration; the standard quadratic setting when absent
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV destination (default: the config's output path, else stdout)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// add simulated estimates
    #[arg(long, global = true)]
    mc: bool,
    /// fewer trials and plans
    #[arg(long, global = true)]
    quick: bool,
    /// simulation seed, overriding the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct PlanArgs {
    /// scheme when no config is given
    #[arg(long, value_parser = ["type1", "hybrid"])]
    scheme: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    /// acceptance threshold; `inf` always accepts
    #[arg(long)]
    zeta: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Itemized Bayes risk of one plan
    Risk(PlanArgs),
    /// Optimum plan by grid search
    Optimize {
        #[arg(long, value_parser = ["type1", "hybrid"])]
        scheme: Option<String>,
        /// write the best plan of every scanned sample size here
        #[arg(long)]
        scan_log: Option<PathBuf>,
    },
    /// Regenerate a bundled table
    Reproduce {
        #[arg(required_unless_present = "list")]
        table_id: Option<String>,
        /// list the bundled tables
        #[arg(long)]
        list: bool,
    },
    /// Run the self-check suite
    Validate {
        #[arg(long, value_parser = ["type1", "hybrid"])]
        scheme: Option<String>,
    },
}

fn scheme_of(s: &Option<String>) -> SchemeKind {
    match s.as_deref() {
        Some("hybrid") => SchemeKind::Hybrid,
        _ => SchemeKind::Type1,
    }
}

fn base_config(cli: &Cli, scheme: &Option<String>) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::standard(scheme_of(scheme)),
    };
    if cli.config.is_some() && scheme.is_some() && scheme_of(scheme) != cfg.scheme {
        return Err(CliError::Config(
            "--scheme disagrees with the config file".into(),
        ));
    }
    if let Some(s) = cli.seed {
        cfg.mc.seed = s;
    }
    Ok(cfg)
}

fn apply_plan(cfg: &mut RunConfig, a: &PlanArgs) -> Result<()> {
    if a.n.is_none() && a.r.is_none() && a.tau.is_none() && a.zeta.is_none() {
        return Ok(());
    }
    let cur = cfg.plan;
    let pick = |x: Option<f64>, c: Option<f64>, name: &str| {
        x.or(c)
            .ok_or_else(|| CliError::Config(format!("--{name} is required")))
    };
    let plan = PlanConfig {
        n: a.n
            .or(cur.map(|p| p.n))
            .ok_or_else(|| CliError::Config("--n is required".into()))?,
        r: a.r.or(cur.and_then(|p| p.r)),
        tau: pick(a.tau, cur.map(|p| p.tau), "tau")?,
        zeta: Threshold(pick(a.zeta, cur.map(|p| p.zeta.0), "zeta")?),
    };
    cfg.plan = Some(plan);
    cfg.check()
}

fn write(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(CliError::from)
        }
    }
}

fn run(cli: &Cli) -> Result<Output> {
    let run = RunOptions {
        mc: cli.mc,
        quick: cli.quick,
    };
    let (out, cfg_out) = match &cli.command {
        Command::Risk(a) => {
            let mut cfg = base_config(cli, &a.scheme)?;
            apply_plan(&mut cfg, a)?;
            (cmd_risk(&cfg, &run)?, cfg.output)
        }
        Command::Optimize { scheme, scan_log } => {
            let cfg = base_config(cli, scheme)?;
            let (out, scan) = cmd_optimize(&cfg, scan_log.is_some())?;
            if let (Some(p), Some(text)) = (scan_log, scan) {
                write(Some(p), &text)?;
            }
            (out, cfg.output)
        }
        Command::Reproduce { list: true, .. } => (cmd_list()?, None),
        Command::Reproduce { table_id, .. } => {
            let id = table_id.as_deref().unwrap_or_default();
            let table = catalog::find(id)?;
            (cmd_reproduce(table, &run, cli.seed)?, None)
        }
        Command::Validate { scheme } => {
            let cfg = base_config(cli, scheme)?;
            (cmd_validate(&cfg, &run)?, cfg.output)
        }
    };
    let dest = cli.out.clone().or(cfg_out.map(PathBuf::from));
    write(dest.as_deref(), &out.csv)?;
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            if let Some(e) = &out.failure {
                eprintln!("lifeplan: {e}");
            }
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("lifeplan: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
