mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Scene-interpretation experiments with LTN and RWTN grounders.
#[derive(Debug, Parser)]
#[command(name = "rwtn", version, args_override_self = true)]
pub struct Cli {
    /// Optional key=value file; keys are long flag names without dashes.
    /// Flags given on the command line override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Root of the data/, models/ and reports/ folders.
    #[arg(long, global = true, default_value = "runs")]
    pub out: PathBuf,

    /// Seed for data generation, initialization, reservoirs and noise.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene dataset.
    GenData(GenDataArgs),
    /// Train a model on a generated dataset.
    Train(TrainArgs),
    /// Evaluate a trained model on the test split.
    Eval(EvalArgs),
    /// Aggregate evaluations over several seeds.
    Compare(CompareArgs),
    /// Print parameter counts; no checkpoint needed.
    ParamCount(ParamCountArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 200)]
    pub scenes: usize,
    /// Whole-object classes.
    #[arg(long, default_value_t = 8)]
    pub wholes: usize,
    /// Part classes.
    #[arg(long, default_value_t = 8)]
    pub parts: usize,
    /// Standard deviation of the detector-score noise.
    #[arg(long, default_value_t = 0.15)]
    pub noise: f64,
    /// Relative geometry jitter of part boxes.
    #[arg(long, default_value_t = 0.05)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Output folder [default: <out>/data/seed-<seed>]
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DecoderFitArg {
    Rmsprop,
    Ridge,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value = "rwtn", value_parser = ["ltn", "rwtn", "rwtn-shared"])]
    pub model: String,
    /// Dataset folder [default: <out>/data/seed-<seed>]
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    /// L2 coefficient on the trainable weights.
    #[arg(long, default_value_t = 1e-10)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    pub decay: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    /// LTN tensor slices.
    #[arg(long, default_value_t = 6)]
    pub k: usize,
    /// RWTN decoder hidden units.
    #[arg(long, default_value_t = 20)]
    pub t: usize,
    /// Reservoir units.
    #[arg(long = "R", alias = "units", default_value_t = 200)]
    pub units: usize,
    /// Spectral radius of every reservoir slice.
    #[arg(long, default_value_t = 0.6)]
    pub rho: f64,
    /// Fraction of nonzero reservoir weights.
    #[arg(long, default_value_t = 0.25)]
    pub beta: f64,
    /// Input weight half-range.
    #[arg(long, default_value_t = 0.5)]
    pub omega: f64,
    /// Training noise standard deviation.
    #[arg(long, default_value_t = 0.01)]
    pub xi: f64,
    /// How RWTN decoders are fitted (ridge is outside the comparison protocol).
    #[arg(long, value_enum, default_value_t = DecoderFitArg::Rmsprop)]
    pub decoder_fit: DecoderFitArg,
    /// Classes whose decoders are exported as separate files: `all` or a comma list.
    #[arg(long, default_value = "all")]
    pub classes: String,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, default_value = "rwtn", value_parser = ["ltn", "rwtn", "rwtn-shared"])]
    pub model: String,
    /// Dataset folder [default: <out>/data/seed-<seed>]
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Checkpoint file [default: <out>/models/seed-<seed>/<model>/model.json]
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Decision threshold for the reported operating point.
    #[arg(long, default_value_t = 0.7)]
    pub th: f64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Comma-separated models.
    #[arg(long, default_value = "ltn,rwtn")]
    pub models: String,
    /// Number of consecutive seeds, starting at --seed.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0.7)]
    pub th: f64,
}

#[derive(Debug, Args)]
pub struct ParamCountArgs {
    #[arg(long, default_value = "rwtn", value_parser = ["ltn", "rwtn", "rwtn-shared"])]
    pub model: String,
    /// Feature size of one argument.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Predicate arity.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 6)]
    pub k: usize,
    #[arg(long = "R", alias = "units", default_value_t = 200)]
    pub units: usize,
    #[arg(long, default_value_t = 20)]
    pub t: usize,
    /// Classifiers sharing one encoder.
    #[arg(long, default_value_t = 11)]
    pub i: usize,
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let (cli, report) = match config::parse(raw) {
        Ok(v) => v,
        Err(e) => return e.exit(),
    };
    eprint!("{report}");
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.exit(),
    }
}
