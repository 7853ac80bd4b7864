//! Batch front end wiring ingestion -> spectral -> manifold -> evaluation.
//!
//! Exit codes: 0 success, 2 configuration or validation error, 3 data
//! condition (disconnection, zero variance, assumption violations),
//! 4 numerical non-convergence.

mod commands;
mod config;
mod outputs;
mod svg;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::PipelineConfig;
use outputs::ArtifactWriter;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(geolift_core::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<geolift_core::Error> for CliError {
    fn from(e: geolift_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                geolift_core::Error::Dimension(_)
                | geolift_core::Error::Validation(_)
                | geolift_core::Error::Parse { .. }
                | geolift_core::Error::Io(_) => 2,
                geolift_core::Error::Data(_) | geolift_core::Error::Assumption(_) => 3,
                geolift_core::Error::Convergence(_) => 4,
            },
        }
    }
}

#[derive(Parser)]
#[command(
    name = "geolift",
    about = "Latent position recovery: spectral embedding followed by Isomap",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cap on worker threads for parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a latent position graph from a catalog kernel.
    Simulate,
    /// Spectrally embed the input matrix.
    Embed,
    /// Run Isomap on the embedding.
    Isomap,
    /// Compute requested metrics from the Isomap output.
    Evaluate,
    /// Run simulate-or-load, embed, isomap and evaluate in sequence.
    Pipeline,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))?;
    }
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config <file> is required".into()))?;
    let config = PipelineConfig::load(config_path)?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set \"out\"".into()))?;
    let mut writer = ArtifactWriter::new(&out_dir)?;
    match cli.command {
        Command::Simulate => commands::cmd_simulate(&config, &mut writer),
        Command::Embed => commands::cmd_embed(&config, &mut writer),
        Command::Isomap => commands::cmd_isomap(&config, &mut writer),
        Command::Evaluate => commands::cmd_evaluate(&config, &mut writer),
        Command::Pipeline => commands::cmd_pipeline(&config, &mut writer),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
