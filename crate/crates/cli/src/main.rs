//! `chanmetrics` command-line front end.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::ModelSpec;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "chanmetrics", version, about = "Massive MIMO channel metrics toolkit")]
pub struct Cli {
    /// Master seed for every stochastic step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads, 0 for one per core. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset.
    Synth(ModelArgs),
    /// Run experiments and write curves, tables and a summary.
    Analyze(AnalyzeArgs),
    /// Check a dataset's manifest and sample files.
    Validate {
        dataset: PathBuf,
    },
    /// Group positions by eigenspace separation.
    Schedule(ScheduleArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Channel model: iid, kronecker or multipath.
    #[arg(long = "model")]
    pub kind: Option<String>,
    /// Kronecker correlation factor.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Multipath steering angles in radians.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub angles: Option<Vec<f64>>,
    /// Multipath path powers.
    #[arg(long, value_delimiter = ',')]
    pub powers: Option<Vec<f64>>,
    #[arg(long)]
    pub noise_floor: Option<f64>,
    #[arg(long)]
    pub antennas: Option<usize>,
    #[arg(long)]
    pub snapshots: Option<usize>,
    #[arg(long)]
    pub freqs: Option<usize>,
    #[arg(long)]
    pub positions: Option<usize>,
    /// Array layout written to the manifest: ula or ura.
    #[arg(long)]
    pub array: Option<String>,
    /// URA row count.
    #[arg(long)]
    pub rows: Option<usize>,
}

impl ModelArgs {
    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            kind: self.kind.clone(),
            rho: self.rho,
            angles: self.angles.clone(),
            powers: self.powers.clone(),
            noise_floor: self.noise_floor,
            antennas: self.antennas,
            snapshots: self.snapshots,
            freqs: self.freqs,
            positions: self.positions,
            array: self.array.clone(),
            rows: self.rows,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct AnalyzeArgs {
    /// Dataset directory; takes precedence over any model.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Experiments to run (hardening, correlation, condition, eigen, schedule).
    #[arg(long, value_delimiter = ',')]
    pub experiments: Option<Vec<String>>,
    #[arg(long)]
    pub window_length: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub antenna_counts: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub node_counts: Option<Vec<usize>>,
    /// Antennas used by the condition-number experiment.
    #[arg(long)]
    pub antenna_count: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Dominant eigenspace dimension.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub frequency: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub group_a: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub group_b: Option<Vec<String>>,
    #[arg(long)]
    pub group_size: Option<usize>,
    /// Scheduling separation: chordal or correlation.
    #[arg(long)]
    pub metric: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub window_length: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub group_size: Option<usize>,
    #[arg(long)]
    pub metric: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
