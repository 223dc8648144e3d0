//! mixtape: an offline music-recommendation experiment pipeline.
//!
//! Each subcommand runs one pipeline stage against the artifacts in the
//! output directory; `pipeline` runs them all in order. `--stage NAME`
//! is an alternative spelling of the subcommand.

mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, PipelineConfig};
use stages::{CliError, Stage};

#[derive(Parser)]
#[command(
    name = "mixtape",
    version,
    about = "Offline music recommendation pipeline: popularity and matrix-factor \
             recommenders combined per user by predicted ranking performance"
)]
struct Cli {
    /// TOML configuration file; flags below override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Root random seed; required here or in the config file.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads for stage-internal parallelism (never changes
    /// output bytes). Defaults to the number of cores.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Fuse with each component's measured test metrics instead of
    /// regression predictions.
    #[arg(long, global = true)]
    oracle_mode: bool,

    /// Stage to run, as an alternative to a subcommand.
    #[arg(long, global = true, value_name = "NAME")]
    stage: Option<String>,

    /// Output directory for all artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic popularity-biased listening corpus.
    Synth,
    /// Parse the corpus and build the filtered playcount matrix.
    Ingest,
    /// Assign users to train/test/reg roles and hide held-out plays.
    Split,
    /// Train the matrix-factorization recommender.
    Train,
    /// Extract per-user listening-behavior features.
    Features,
    /// Fit per-metric performance regressions on counterpart models.
    Regress,
    /// Evaluate baselines and all hybrid strategies on the test users.
    #[command(visible_alias = "hybridize")]
    Hybrid,
    /// Emit the CSV tables and the run manifest.
    Report,
    /// Run every stage in order.
    Pipeline,
}

impl Command {
    fn stage(&self) -> Stage {
        match self {
            Command::Synth => Stage::Synth,
            Command::Ingest => Stage::Ingest,
            Command::Split => Stage::Split,
            Command::Train => Stage::Train,
            Command::Features => Stage::Features,
            Command::Regress => Stage::Regress,
            Command::Hybrid => Stage::Hybrid,
            Command::Report => Stage::Report,
            Command::Pipeline => Stage::Pipeline,
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let stage = match (&cli.command, &cli.stage) {
        (Some(cmd), None) => cmd.stage(),
        (None, Some(name)) => name.parse()?,
        (None, None) => {
            return Err(CliError::Config(
                "nothing to do: pass a subcommand or --stage NAME".into(),
            ))
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "pass either a subcommand or --stage NAME, not both".into(),
            ))
        }
    };

    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            PipelineConfig::from_toml(&text)?
        }
        None => PipelineConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        out: cli.out.as_deref(),
        oracle_mode: cli.oracle_mode,
    });
    cfg.validate()?;

    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be ≥ 1".into()));
        }
        mixtape_core::parallel::configure_workers(n);
    }

    stages::run_stage(stage, &cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mixtape: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
