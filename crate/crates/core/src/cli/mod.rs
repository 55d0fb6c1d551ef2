//! Command-line front end.
//!
//! ```text
//! ocgraph run      --config c.toml [--seed N] [--jobs N] [--dry-run] [--grid-max]
//! ocgraph ablate   --config c.toml ...
//! ocgraph stage    <embed|graph|katz|lp2|augment|classify> --config c.toml ...
//! ocgraph report   --config c.toml ...
//! ```
//!
//! `run` executes every stage and writes the same artifacts the stage
//! commands write one at a time, so the two routes produce identical files:
//!
//! ```text
//! <output>/embeddings.txt                  embed
//! <output>/graph.txt                       graph
//! <output>/runs/f<i>-r<r>/labeled.txt      katz
//! <output>/runs/f<i>-r<r>/katz_selection.txt
//! <output>/runs/f<i>-r<r>/pseudo_labels.txt lp2
//! <output>/augmented.txt                   augment
//! <output>/runs/f<i>-r<r>/predictions.jsonl classify
//! <output>/report.csv, report.json         report
//! ```
//!
//! `run --grid-max` instead repeats the protocol for every point of the
//! `[grid]` section and writes the per-repetition best to
//! `<output>/grid/report.{csv,json}`; `ablate` writes `<output>/ablation/`.

mod config;
mod workspace;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::{DataConfig, DataSource, EmbeddingSource, PipelineConfig, ProtocolConfig};
pub use workspace::Workspace;

use crate::error::{Result, Stage};

#[derive(Debug, Parser)]
#[command(
    name = "ocgraph",
    version,
    about = "One-class graph classification pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the master seed of the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for independent repetitions.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Validate the configuration and stop.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every stage and write predictions and the evaluation report.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Report, per repetition, the best run over the `[grid]` points.
        #[arg(long)]
        grid_max: bool,
    },
    /// Run the one-step and two-step arms with paired seeds.
    Ablate(CommonArgs),
    /// Run a single stage from the artifacts of the previous ones.
    Stage {
        /// embed, graph, katz, lp2, augment or classify.
        name: Stage,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score existing predictions and write the evaluation report.
    Report(CommonArgs),
}

fn open(common: &CommonArgs) -> Result<Option<Workspace>> {
    let mut config = PipelineConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.validate()?;
    if common.jobs < 1 {
        return Err(crate::Error::param("jobs", "must be at least 1"));
    }
    if common.dry_run {
        println!("config ok ({})", config.hash());
        print!("{}", config.to_toml());
        return Ok(None);
    }
    Ok(Some(Workspace::new(config, common.jobs)))
}

/// Executes a parsed command.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, grid_max } => {
            if let Some(ws) = open(&common)? {
                if grid_max {
                    ws.grid_max()?;
                } else {
                    ws.run()?;
                }
            }
        }
        Command::Ablate(common) => {
            if let Some(ws) = open(&common)? {
                ws.ablate()?;
            }
        }
        Command::Stage { name, common } => {
            if let Some(ws) = open(&common)? {
                ws.stage(name)?;
            }
        }
        Command::Report(common) => {
            if let Some(ws) = open(&common)? {
                ws.report()?;
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs the command, and reports failures on stderr.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ocgraph: error: {e}");
            ExitCode::FAILURE
        }
    }
}
