//! Command line: flag parsing, overrides, the run loop and exit codes.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand as ClapSubcommand};

use crate::config::ExperimentConfig;
use crate::error::{RunError, RunResult};
use crate::lab::Lab;
use crate::output::{Artifacts, Summary};
use crate::suite::Subcommand;

#[derive(Debug, Parser)]
#[command(name = "skl", version, about = "Kernel estimates for -L_mu = -(Delta + mu/d_K^2): experiments and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed of every probe draw and test dictionary.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for independent solves.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Largest accepted max/min ratio in bounded-ratio reports.
    #[arg(long, global = true)]
    pub spread_cap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ClapSubcommand)]
pub enum Command {
    /// Principal eigenpair and eigenfunction envelope.
    Eig,
    /// Green fields, oracle match and envelope reports.
    Green,
    /// Martin kernels, normalisation, slope and envelope reports.
    Martin,
    /// Harmonic measures: doubling, Green link, collar behaviour.
    Hmeasure,
    /// Heat stepper against the Green field.
    Heat,
    /// Measure-data problems: weak residual, a priori bound, traces.
    Bvp,
    /// Sign sweep of the barrier families.
    Barriers,
    /// Integrability thresholds of Martin kernels.
    LpScan,
    /// Every experiment.
    VerifyAll,
    /// Prints the effective configuration as TOML.
    Config,
}

impl Command {
    pub fn experiments(self) -> Vec<Subcommand> {
        match self {
            Command::Eig => vec![Subcommand::Eig],
            Command::Green => vec![Subcommand::Green],
            Command::Martin => vec![Subcommand::Martin],
            Command::Hmeasure => vec![Subcommand::Hmeasure],
            Command::Heat => vec![Subcommand::Heat],
            Command::Bvp => vec![Subcommand::Bvp],
            Command::Barriers => vec![Subcommand::Barriers],
            Command::LpScan => vec![Subcommand::LpScan],
            Command::VerifyAll => Subcommand::ALL.to_vec(),
            Command::Config => Vec::new(),
        }
    }
}

/// Configuration with the command-line overrides applied and validated.
pub fn effective_config(cli: &Cli) -> RunResult<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(cap) = cli.spread_cap {
        cfg.spread_cap = cap;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the experiments in order. A failing experiment is recorded and the
/// rest still run.
pub fn run_experiments(lab: &Lab, experiments: &[Subcommand]) -> Summary {
    let mut summary = Summary { config_hash: lab.cfg.hash(), criteria: Vec::new(), errors: Vec::new() };
    for &e in experiments {
        match e.run(lab) {
            Ok(c) => summary.criteria.extend(c),
            Err(err) => summary.errors.push(err.record(e.name())),
        }
    }
    summary
}

pub fn exit_code(summary: &Summary) -> i32 {
    if let Some(e) = summary.errors.iter().map(|e| e.exit_code).max() {
        e
    } else if summary.pass() {
        0
    } else {
        1
    }
}

fn print_summary(summary: &Summary) {
    for c in &summary.criteria {
        println!("{} {} value={} bound={}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.bound);
    }
    for e in &summary.errors {
        eprintln!("ERROR [{}] {}: {}", e.stage, e.kind, e.message);
    }
}

fn config_failure(err: &RunError, out: Option<&PathBuf>) -> i32 {
    eprintln!("error: {err}");
    if let Some(dir) = out {
        let summary = Summary { config_hash: String::new(), criteria: Vec::new(), errors: vec![err.record("config")] };
        if let Ok(mut a) = Artifacts::new(dir, false, false) {
            let _ = a.json("summary", &summary);
        }
    }
    err.exit_code()
}

pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cfg = match effective_config(&cli) {
        Ok(c) => c,
        Err(e) => return config_failure(&e, cli.out.as_ref()),
    };
    if cli.command == Command::Config {
        print!("{}", cfg.to_toml());
        return 0;
    }
    if let Some(t) = cfg.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let artifacts = match Artifacts::new(&cfg.output.dir, cfg.output.plots, cfg.output.dumps) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let dir = cfg.output.dir.clone();
    let lab = Lab::new(cfg, Some(artifacts));
    let summary = run_experiments(&lab, &cli.command.experiments());
    print_summary(&summary);
    if let Err(e) = lab.emit(|a| a.json("summary", &summary).map(|_| ())) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    println!("summary: {}", dir.join("summary.json").display());
    exit_code(&summary)
}
