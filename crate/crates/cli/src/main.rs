//! `osassl`: configuration-driven sequential super-learning runs.
//!
//! Subcommands:
//! - `run --config <path> [--workers N] [--out DIR]`: run the full
//!   pipeline and write the report artifacts.
//! - `validate --config <path>`: list every configuration violation
//!   without running anything.
//! - `gen --spec <path> --out DIR`: generate a synthetic panel with its
//!   schema and truth sidecars.

mod config;
mod outputs;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "osassl",
    version,
    about = "Sequential super learning over cost panels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads for learner fitting and permutation testing
        /// (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (overrides the config's `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and list all violations.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic panel from a generator spec.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            workers,
            out,
        } => {
            if let Some(workers) = workers {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build_global()
                    .map_err(|e| anyhow::anyhow!("config stage: workers: {e}"))?;
            }
            let run_config =
                RunConfig::load(&config).map_err(|e| anyhow::anyhow!("config stage: {e}"))?;
            let out_dir = out.unwrap_or_else(|| run_config.output_dir.clone());
            pipeline::execute(&run_config, &out_dir)?;
            println!("run complete: artifacts in `{}`", out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let run_config =
                RunConfig::load(&config).map_err(|e| anyhow::anyhow!("config stage: {e}"))?;
            let diagnostics = run_config.diagnostics();
            if diagnostics.is_empty() {
                println!("config ok");
                Ok(ExitCode::SUCCESS)
            } else {
                for diagnostic in &diagnostics {
                    println!("violation: {diagnostic}");
                }
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Gen { spec, out } => {
            let text = std::fs::read_to_string(&spec).map_err(|e| {
                anyhow::anyhow!("config stage: cannot read spec `{}`: {e}", spec.display())
            })?;
            let generator_spec: osassl_core::synthgen::GeneratorSpec = serde_json::from_str(&text)
                .map_err(|e| {
                    anyhow::anyhow!("config stage: cannot parse spec `{}`: {e}", spec.display())
                })?;
            pipeline::generate_to_dir(&generator_spec, &out)?;
            println!("panel written to `{}`", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
