//! Command-line front end: one subcommand per experiment plus `selftest`.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_pairs, resolve_seed, Experiment, ExperimentConfig, SEED_ENV};
use crate::error::{config, Error, Result};
use crate::mc::run_experiment;
use crate::selftest::oracle_battery;

#[derive(Debug, Parser)]
#[command(name = "causal-cart", version, about = "Causal and regression trees with Monte Carlo checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Root split index of stumps grown on pure noise.
    SplitIndex(RunArgs),
    /// Pointwise RMSE of every estimator over a grid.
    RmseGrid(RunArgs),
    /// Integrated squared error of X-adaptive regression trees.
    Imse(RunArgs),
    /// Monte Carlo mean of each estimator at one point.
    Bias(RunArgs),
    /// Tail of the uniform estimation error.
    SupError(RunArgs),
    /// Left-cell measure of X-adaptive stumps by left count.
    BetaMeasure(RunArgs),
    /// Normalised maxima of Ornstein–Uhlenbeck path norms.
    OuDarlingErdos(RunArgs),
    /// Location of the maximum of an Ornstein–Uhlenbeck path.
    OuMaxloc(RunArgs),
    /// Compare the fast split search with the brute-force oracle.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Flat `key = value` file; must name the same experiment.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed [fallback: config, then $CAUSAL_CART_SEED].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replications, overriding the config.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of random datasets.
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
}

impl Command {
    fn experiment(&self) -> Option<(Experiment, &RunArgs)> {
        Some(match self {
            Command::SplitIndex(a) => (Experiment::SplitIndex, a),
            Command::RmseGrid(a) => (Experiment::RmseGrid, a),
            Command::Imse(a) => (Experiment::Imse, a),
            Command::Bias(a) => (Experiment::Bias, a),
            Command::SupError(a) => (Experiment::SupError, a),
            Command::BetaMeasure(a) => (Experiment::BetaMeasure, a),
            Command::OuDarlingErdos(a) => (Experiment::OuDarlingErdos, a),
            Command::OuMaxloc(a) => (Experiment::OuMaxloc, a),
            Command::Selftest(_) => return None,
        })
    }
}

/// Builds the configuration for `experiment` from the flags, config file and environment.
pub fn resolve_config(experiment: Experiment, args: &RunArgs, env_seed: Option<&str>) -> Result<ExperimentConfig> {
    let (mut cfg, config_seed) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| config(format!("cannot read config {}: {e}", path.display())))?;
            let cfg = ExperimentConfig::from_text(&text)?;
            if cfg.experiment != experiment {
                return Err(config(format!(
                    "config {} is for experiment {}, not {experiment}",
                    path.display(),
                    cfg.experiment
                )));
            }
            let seeded = parse_pairs(&text)?.contains_key("seed");
            let seed = seeded.then_some(cfg.seed);
            (cfg, seed)
        }
        None => (ExperimentConfig::defaults(experiment), None),
    };
    cfg.seed = resolve_seed(args.seed, config_seed, env_seed)?;
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a command and returns the lines to print.
pub fn run_command(command: &Command) -> Result<Vec<String>> {
    let env_seed = std::env::var(SEED_ENV).ok();
    if let Command::Selftest(a) = command {
        let seed = resolve_seed(a.seed, None, env_seed.as_deref())?;
        let report = oracle_battery(seed, a.instances);
        let mut lines = vec![format!(
            "selftest: {} instances, seed {seed}; T/DIM argmax compared on {}",
            report.instances, report.tstat_dim_compared
        )];
        let failures = [
            ("argmax", &report.argmax_mismatches),
            ("criterion value", &report.value_mismatches),
            ("ipw/cart", &report.ipw_cart_mismatches),
            ("tstat/dim", &report.tstat_dim_mismatches),
            ("sse identity", &report.sse_identity_violations),
        ];
        for (what, list) in failures {
            lines.push(format!("{what}: {} mismatches", list.len()));
            lines.extend(list.iter().take(5).cloned());
        }
        return if report.passed() {
            Ok(lines)
        } else {
            Err(Error::Statistical(lines.join("\n")))
        };
    }
    let (experiment, args) = command.experiment().expect("non-selftest commands name an experiment");
    let cfg = resolve_config(experiment, args, env_seed.as_deref())?;
    let output = run_experiment(&cfg, args.workers)?;
    let mut lines = Vec::new();
    for (name, table) in &output.files {
        let path = args.out.join(name);
        table.write_atomic(&path)?;
        lines.push(format!(
            "wrote {} ({} rows, seed {}, config {})",
            path.display(),
            table.rows.len(),
            table.seed,
            table.config_hash
        ));
    }
    lines.extend(output.summary);
    Ok(lines)
}

/// Process exit status for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        _ => 1,
    }
}
