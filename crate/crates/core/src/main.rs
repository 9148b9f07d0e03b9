use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use asor_lab::cli::{self, Console, ExperimentSpec, Outcome, Overrides};
use asor_lab::train::Algorithm;
use clap::{Args, Parser, Subcommand};

/// Exact tabular experiments on accessible-state reward augmentation.
#[derive(Debug, Parser)]
#[command(name = "asor-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Layout TOML; overrides the one named in the experiment file.
    #[arg(long, global = true)]
    layout: Option<PathBuf>,
    /// Experiment spec TOML.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of seeds; runs use seeds 0..N.
    #[arg(long, global = true)]
    seeds: Option<usize>,
    /// Longest detour the certificate search may use.
    #[arg(long = "m-max", global = true)]
    m_max: Option<usize>,
    /// Algorithm to train; repeat to compare several.
    #[arg(long = "algo", global = true, value_parser = parse_algo)]
    algos: Vec<Algorithm>,
    /// Weight of the log-discriminator bonus.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Value-quantile fraction of the partition.
    #[arg(long, global = true)]
    rho1: Option<f64>,
    /// Count-quantile fraction of the partition.
    #[arg(long, global = true)]
    rho2: Option<f64>,
    /// Suppress progress output.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Accessible states, optimal values, occupancies and divergences.
    Analyze,
    /// Detour certificates for every ordered pair of hidden parameters.
    Certify,
    /// Train the configured algorithms over seeds.
    Train,
    /// Re-evaluate the policies written by `train`.
    Eval,
    /// Check the return lower bound on random, optimal and trained policies.
    VerifyBounds,
    /// Sweep the bonus weight and switch the partition filters off.
    Ablate,
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: asor_lab::Error| e.to_string())
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("ASOR_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("ASOR_LAB_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")
}

fn load_spec(common: &Common) -> Result<ExperimentSpec> {
    let mut spec = match &common.config {
        Some(path) => ExperimentSpec::load(path)
            .with_context(|| format!("loading spec {}", path.display()))?,
        None => ExperimentSpec::default(),
    };
    let overrides = Overrides {
        layout: common.layout.clone(),
        out: common.out.clone(),
        seeds: common.seeds,
        m_max: common.m_max,
        algorithms: common.algos.clone(),
        lambda: common.lambda,
        rho1: common.rho1,
        rho2: common.rho2,
    };
    spec.apply(&overrides)?;
    Ok(spec)
}

fn run(cli: &Cli) -> Result<Outcome> {
    configure_threads()?;
    let spec = load_spec(&cli.common)?;
    let console = Console {
        quiet: cli.common.quiet,
    };
    let outcome = match cli.command {
        Command::Analyze => cli::cmd_analyze(&spec, console),
        Command::Certify => cli::cmd_certify(&spec, console),
        Command::Train => cli::cmd_train(&spec, console),
        Command::Eval => cli::cmd_eval(&spec, console),
        Command::VerifyBounds => cli::cmd_verify_bounds(&spec, console),
        Command::Ablate => cli::cmd_ablate(&spec, console),
    }?;
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(u8::from(usage));
        }
    };
    match run(&cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
