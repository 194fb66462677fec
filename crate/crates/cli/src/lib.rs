//! Command-line pipeline: simulate, train, predict, evaluate, score and
//! analyze firm panels.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "exportscore", version, about = "Export-status prediction and exporting scores")]
pub struct Cli {
    /// TOML run configuration; defaults apply to every absent key.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set model.bart.trees=100`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    /// Cap on worker threads.
    #[arg(long, global = true, env = "EXPORTSCORE_THREADS")]
    pub threads: Option<usize>,

    /// Leave the generation-time line out of output CSVs.
    #[arg(long, global = true)]
    pub no_timestamp: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a synthetic panel and its ground truth.
    Simulate,
    /// Fit the configured model on the training firms.
    Train,
    /// Score panel rows with a trained model.
    Predict,
    /// Accuracy reports, grouped reports and rank correlations.
    Evaluate {
        /// Model documents; overrides `evaluate.models`.
        models: Vec<PathBuf>,
    },
    /// Scores, distances, risk classes and resource premia.
    Score,
    /// Potential exporters, location quotients, group summaries, inclusion
    /// proportions.
    Analyze,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Train => "train",
            Command::Predict => "predict",
            Command::Evaluate { .. } => "evaluate",
            Command::Score => "score",
            Command::Analyze => "analyze",
        }
    }
}

/// A failed run: category, one-line message and exit code.
#[derive(Debug)]
pub struct Failure {
    pub kind: &'static str,
    pub message: String,
    pub code: i32,
}

impl Failure {
    fn config(e: anyhow::Error) -> Self {
        Self { kind: "config", message: one_line(&e), code: 2 }
    }

    fn run(e: anyhow::Error) -> Self {
        let kind = e
            .chain()
            .find_map(|c| {
                c.downcast_ref::<exportscore::Error>()
                    .map(|e| e.kind())
                    .or_else(|| c.downcast_ref::<std::io::Error>().map(|_| "io"))
            })
            .unwrap_or("runtime");
        Self { kind, message: one_line(&e), code: 1 }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "error kind={} message={:?}", self.kind, self.message)
    }
}

fn one_line(e: &anyhow::Error) -> String {
    format!("{e:#}").replace(['\n', '\r'], " ").trim().to_string()
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::config(anyhow::anyhow!("threads: must be positive")));
        }
        // a pool built earlier in this process keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut overrides = cli.overrides.clone();
    if let Command::Evaluate { models } = &cli.command {
        if !models.is_empty() {
            let list: Vec<String> = models.iter().map(|m| format!("{:?}", m.display().to_string())).collect();
            overrides.push(format!("evaluate.models=[{}]", list.join(", ")));
        }
    }
    let mut config = config::load(cli.config.as_deref(), &overrides).map_err(Failure::config)?;
    if cli.no_timestamp {
        config.timestamp = false;
    }
    let ctx = commands::Context::new(config);
    commands::run(&ctx, cli.command.name()).map_err(Failure::run)
}
