//! `afib`: synthesise recordings, extract interval features, train and
//! apply the logistic screen, and evaluate it by cross-validation.
//!
//! Exit status: 0 success, 1 usage error, 2 data or format error, 3 numeric
//! failure (for example a training set with a single class).

mod commands;
mod error;
mod files;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use afib_core::preprocess::SignalKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "afib", version, about = "Atrial fibrillation screening from beat intervals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate labelled synthetic recordings and a `file,label` manifest.
    Synth(SynthArgs),
    /// Signal CSV or interval file(s) to an `f1,…,f5` feature table.
    Extract(ExtractArgs),
    /// Fit a logistic model on a labelled feature table.
    Train(TrainArgs),
    /// Apply a model to recording(s); writes `label,probability` rows.
    Classify(ClassifyArgs),
    /// Stratified k-fold cross-validation; writes metrics and ROC CSVs.
    Eval(EvalArgs),
    /// Greedy forward feature selection; writes the inclusion order.
    Select(SelectArgs),
}

#[derive(Debug, Args)]
struct SignalArgs {
    /// Signal kind of CSV waveform inputs.
    #[arg(long, default_value = "ppg")]
    kind: SignalKind,
    /// Sampling rate in Hz; estimated from the timestamps when omitted.
    #[arg(long)]
    rate: Option<f64>,
}

#[derive(Debug, Args)]
struct FeatureArgs {
    /// Histogram bins for f2.
    #[arg(long, default_value_t = 2)]
    bins: usize,
    /// Difference order for f1.
    #[arg(long = "deriv-order", default_value_t = 5)]
    deriv_order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SynthFormat {
    /// `t,v` waveform CSV.
    Signal,
    /// One interval in ms per line.
    Intervals,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory; recordings go to `recordings/`, labels to `labels.csv`.
    #[arg(long)]
    output: PathBuf,
    /// Recordings per class.
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "ppg")]
    kind: SignalKind,
    /// Sampling rate in Hz (default 30 for PPG, 250 for ECG).
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, value_enum, default_value_t = SynthFormat::Signal)]
    format: SynthFormat,
    /// Recording length in seconds.
    #[arg(long, default_value_t = 30.0)]
    duration: f64,
    /// Additive noise level; `inf` for a noise-free waveform.
    #[arg(long = "snr-db", default_value_t = 20.0)]
    snr_db: f64,
    /// Baseline wander amplitude relative to the pulse height.
    #[arg(long, default_value_t = 0.2)]
    drift: f64,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// A recording, or a directory of recordings (processed in name order).
    #[arg(long)]
    input: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    signal: SignalArgs,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Feature table with a `label` column, or a `file` column plus `--labels`.
    #[arg(long)]
    input: PathBuf,
    /// `file,label` manifest.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Model JSON; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// A recording, or a directory of recordings.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override the model's decision threshold.
    #[arg(long)]
    threshold: Option<f64>,
    #[command(flatten)]
    signal: SignalArgs,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Metrics CSV; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Pooled ROC curve CSV.
    #[arg(long)]
    roc: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
