//! Batch front end: reproducible, plot-ready reports from rating and outcome
//! tables. Every command reads one config (flags win), requires a seed, and
//! writes byte-identical artifacts for identical (config, seed).

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Ctx;
use config::{AnalysisConfig, Overrides};

#[derive(Parser)]
#[command(name = "concordia", version, about = "Alignment measurement for noisy rating studies")]
struct Cli {
    /// Analysis config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed; mandatory here or in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Permutation count for significance tests.
    #[arg(long, global = true)]
    permutations: Option<usize>,
    /// Bootstrap resample count.
    #[arg(long, global = true)]
    bootstrap: Option<usize>,
    /// Sampler chains.
    #[arg(long, global = true)]
    chains: Option<usize>,
    /// Sampler iterations per chain (warmup defaults to half).
    #[arg(long, global = true)]
    iters: Option<usize>,
    /// Two-sided confidence level for intervals.
    #[arg(long, global = true)]
    level: Option<f64>,
    /// Family-wise alpha for Bonferroni masking.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Generator preset for `simulate`.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Concordance of every rating source with the expert axis and outcome axis.
    Align,
    /// Pairwise distance-correlation matrix, clustering, and cell summary.
    Dcor,
    /// Seven-test robustness battery per panel.
    Robust,
    /// Build ensemble sources and compare their alignment to the members'.
    Ensemble,
    /// Variance decomposition of misalignment error.
    Decompose,
    /// Write synthetic bundles with planted truth.
    Simulate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let mut cfg = AnalysisConfig::load(cli.config.as_deref())?;
    cfg.apply(&Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        permutations: cli.permutations,
        bootstrap: cli.bootstrap,
        chains: cli.chains,
        iters: cli.iters,
        level: cli.level,
        alpha: cli.alpha,
        preset: cli.preset.clone(),
    });
    let ctx = Ctx::new(cfg)?;
    match cli.command {
        Command::Align => commands::align::run(&ctx),
        Command::Dcor => commands::dcor::run(&ctx),
        Command::Robust => commands::robust::run(&ctx),
        Command::Ensemble => commands::ensemble::run(&ctx),
        Command::Decompose => commands::decompose::run(&ctx),
        Command::Simulate => commands::simulate::run(&ctx),
    }
}

/// Exit codes: 2 for input problems (files, parsing, unresolvable ids),
/// 1 for analysis failures.
fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<std::io::Error>()
            || cause.is::<toml::de::Error>()
            || cause.is::<csv::Error>()
        {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<concordia::Error>() {
            use concordia::Error::*;
            return match e {
                Io(_) | Csv(_) | Json(_) | MissingColumn(_) | UnparseableScore { .. }
                | Validation(_) | UnknownId { .. } | DisjointUnits | AmbiguousPrompt { .. } => 2,
                _ => 1,
            };
        }
    }
    // Bare anyhow messages come from config/context validation.
    2
}
