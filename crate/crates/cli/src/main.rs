//! `penbias`: simulate scenes, invert with the uniform-volume model, train
//! and evaluate bias estimators, and tabulate the results.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or
//! configuration errors.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use penbias_core::dataset::{
    DEFAULT_TRAIN_FRACTION, DEFAULT_VALIDATION_FRACTION, EXTRAPOLATION_ABOVE, INTERPOLATION_GAP,
};
use penbias_core::evaluation::DEFAULT_ELEVATION_BIN;

#[derive(Debug, Parser)]
#[command(
    name = "penbias",
    version,
    about = "InSAR penetration-bias modelling and correction"
)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic scenes from a key = value config file.
    Simulate(SimulateArgs),
    /// Closed-form uniform-volume bias for every sample.
    InvertUv(InvertUvArgs),
    /// Train a bias estimator under an HoA scenario.
    Train(TrainArgs),
    /// Apply a trained model and write metrics and error distributions.
    Evaluate(EvaluateArgs),
    /// Combine evaluation outputs into a comparison table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DistributionArgs {
    /// Reference-elevation bin width (m).
    #[arg(long, default_value_t = DEFAULT_ELEVATION_BIN)]
    pub bin_width: f64,
    /// Error histogram bin width (m).
    #[arg(long, default_value_t = 0.1)]
    pub hist_bin_width: f64,
}

#[derive(Debug, Args)]
pub struct InvertUvArgs {
    /// Sample CSV, or a directory of them.
    #[arg(long)]
    pub samples: PathBuf,
    /// Per-sample predictions CSV.
    #[arg(long)]
    pub output: PathBuf,
    /// Directory for metrics and distributions of the uncorrected and corrected DEM.
    #[arg(long)]
    pub metrics_dir: Option<PathBuf>,
    #[arg(long)]
    pub clamp_coherence: bool,
    #[command(flatten)]
    pub bins: DistributionArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    HybridExp,
    HybridWeibull,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    All,
    Interpolation,
    Extrapolation,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long, value_enum, default_value = "all")]
    pub scenario: ScenarioArg,
    #[arg(long)]
    pub samples: PathBuf,
    /// Model JSON output.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1024)]
    pub batch: usize,
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "64,64")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    pub train_fraction: f64,
    /// Share of the training split used for early stopping.
    #[arg(long, default_value_t = DEFAULT_VALIDATION_FRACTION)]
    pub validation_fraction: f64,
    #[arg(long, default_value_t = INTERPOLATION_GAP.0)]
    pub interp_lo: f64,
    #[arg(long, default_value_t = INTERPOLATION_GAP.1)]
    pub interp_hi: f64,
    #[arg(long, default_value_t = EXTRAPOLATION_ABOVE)]
    pub extrap_above: f64,
    #[arg(long)]
    pub clamp_coherence: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SubsetArg {
    Test,
    Excluded,
    All,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub subset: SubsetArg,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Approach label for the report (defaults to the model kind).
    #[arg(long)]
    pub label: Option<String>,
    #[command(flatten)]
    pub bins: DistributionArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation output directories, in table order.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out_csv: PathBuf,
    #[arg(long)]
    pub out_text: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate::run(a),
        Command::InvertUv(a) => commands::invert::run(a),
        Command::Train(a) => commands::train::run(a),
        Command::Evaluate(a) => commands::evaluate::run(a),
        Command::Report(a) => commands::report::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
