use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Profile;

#[derive(Debug, Parser)]
#[command(
    name = "ris",
    version,
    about = "RIS phase configuration and element allocation toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the resolved configuration as JSON.
    Config(ConfigArgs),
    /// Generate a dataset of channel realizations.
    Generate(GenerateArgs),
    /// Train the allocation network on a dataset.
    Train(TrainArgs),
    /// Run block coordinate descent on one dataset sample.
    Bcd(BcdArgs),
    /// Evaluate schemes on the validation split and write a comparison table.
    Compare(CompareArgs),
    /// Print network parameter counts with and without PCA.
    Params(ParamsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigSource {
    /// JSON config file; overrides --profile.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in configuration used when no file is given.
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    pub profile: Profile,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[command(flatten)]
    pub source: ConfigSource,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub source: ConfigSource,
    /// Master seed; sample i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_val: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub source: ConfigSource,
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Fairness parameter α > 0.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Train on z-scored raw features instead of PCA components.
    #[arg(long)]
    pub no_pca: bool,
    /// Overrides train.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides train.max_epochs.
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// History CSV path; defaults to the checkpoint path with `.history.csv`.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BcdArgs {
    #[command(flatten)]
    pub source: ConfigSource,
    #[arg(long)]
    pub data: PathBuf,
    /// Sample index across the whole dataset (training split first).
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Overrides bcd.tol.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Overrides bcd.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for `trace.csv` and `result.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Write zeros in timing columns.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum)]
pub enum Scheme {
    /// Contiguous equal-width allocation with BCD-optimized phases.
    Uniform,
    Bcd,
    Brute,
    /// Network trained with --no-pca.
    Nn,
    #[value(name = "nn+pca")]
    NnPca,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Uniform => "uniform",
            Scheme::Bcd => "bcd",
            Scheme::Brute => "brute",
            Scheme::Nn => "nn",
            Scheme::NnPca => "nn+pca",
        }
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub source: ConfigSource,
    #[arg(long)]
    pub data: PathBuf,
    /// Trained checkpoints; nn and nn+pca pick the one with matching preprocessing.
    #[arg(long)]
    pub model: Vec<PathBuf>,
    /// Schemes to evaluate, in output order. Defaults to uniform and bcd.
    #[arg(long, value_enum)]
    pub scheme: Vec<Scheme>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Overrides bcd.tol.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Overrides bcd.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    #[command(flatten)]
    pub source: ConfigSource,
    /// Retained PCA dimension.
    #[arg(long, default_value_t = 6)]
    pub pca_dim: usize,
}
