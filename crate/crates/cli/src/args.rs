use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "SHAPX_SEED";

#[derive(Parser, Debug)]
#[command(name = "shapx", version, about = "Shapley value estimation toolkit")]
pub struct Cli {
    /// TOML file with one table per command; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact attributions by enumeration.
    Exact(ExactArgs),
    /// Sampled attributions from a stochastic estimator.
    Estimate(EstimateArgs),
    /// Train an amortized explainer.
    Train(TrainArgs),
    /// Distances, insertion/deletion curves, convergence and timing reports.
    Eval(EvalArgs),
    /// Time amortized inference against KernelSHAP.
    Bench(BenchArgs),
}

/// Where the explained game comes from: a built-in fixture, or a model
/// checkpoint applied to one dataset row.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct GameArgs {
    /// Built-in game: glove, additive, unanimity, random_uniform, majority or mlp.
    #[arg(long)]
    pub game: Option<String>,
    /// Players of the built-in game.
    #[arg(long)]
    pub players: Option<usize>,
    /// Seed of the built-in game (independent of the estimator seed).
    #[arg(long)]
    pub game_seed: Option<u64>,
    /// Tabular model checkpoint.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// CSV dataset holding the explained row.
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    /// Label column of the dataset.
    #[arg(long)]
    pub label: Option<String>,
    /// Dataset row to explain (0-based, header excluded).
    #[arg(long)]
    pub row: Option<usize>,
    /// Model output explained.
    #[arg(long)]
    pub class: Option<usize>,
    /// Value for removed features: zeros or mean.
    #[arg(long)]
    pub mask: Option<String>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExactArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: GameArgs,
    /// shapley, random-order, least-squares or unified:<sv|lsv|simshap>.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Attribution JSON; the resolved config goes next to it. Prints to stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Write `elapsed_ms: null` so repeated runs are byte-identical.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub omit_timing: Option<bool>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: GameArgs,
    /// semivalue, permutation, antithetical, kernelshap, kernelshap-unbiased,
    /// simshap-sample or unified:<sv|lsv|simshap>.
    #[arg(long)]
    pub method: Option<String>,
    /// Sampling budget M.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Draw subsets with their complements.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub paired: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub omit_timing: Option<bool>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainArgs {
    /// simshap or fastshap.
    #[arg(long)]
    pub method: Option<String>,
    /// Additive efficient normalization inside the FastSHAP explainer.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub normalize: Option<bool>,
    /// CSV training data; a built-in dataset is used when absent.
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub label: Option<String>,
    /// Built-in dataset: synthetic-linear or synthetic-classification.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Rows of the built-in dataset.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Features of the built-in dataset.
    #[arg(long)]
    pub features: Option<usize>,
    /// Classes of the synthetic classification dataset.
    #[arg(long)]
    pub dataset_classes: Option<usize>,
    /// Tabular model checkpoint to explain; trained in-run when absent.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Model trained in-run: linear, logistic or mlp.
    #[arg(long)]
    pub model_kind: Option<String>,
    #[arg(long)]
    pub model_epochs: Option<usize>,
    #[arg(long)]
    pub mask: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// constant or cosine.
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Subsets drawn per input and epoch.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub paired: Option<bool>,
    /// sgd or adam.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    /// Subsets behind each fixed validation target.
    #[arg(long)]
    pub validation_samples: Option<usize>,
    /// SimSHAP metric: identity or lsv.
    #[arg(long)]
    pub metric: Option<String>,
    /// Hidden widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// relu or elu.
    #[arg(long)]
    pub activation: Option<String>,
    /// Parameter averaging decay; 0 disables it.
    #[arg(long)]
    pub ema_decay: Option<f64>,
    /// Supervise every class per input instead of the labeled one.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub all_classes: Option<bool>,
    /// Stop after this many epochs without validation improvement; 0 disables it.
    #[arg(long)]
    pub early_stop_patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvalArgs {
    /// l1l2, insertion, deletion, convergence or bench.
    #[arg(long)]
    pub metric: Option<String>,
    /// Attribution file(s) to score against --truth.
    #[arg(long, value_name = "FILE")]
    pub estimate: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub source: GameArgs,
    /// Attribution ordering the curve; exact Shapley values when absent.
    #[arg(long, value_name = "FILE")]
    pub attribution: Option<PathBuf>,
    /// Random orderings in the curve baseline.
    #[arg(long)]
    pub random_orders: Option<usize>,
    /// Estimator probed for convergence.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub paired: Option<bool>,
    /// Sample budgets, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// Repetitions per budget.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub bench: BenchParams,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct BenchParams {
    /// Features of the benchmark model.
    #[arg(long)]
    pub bench_features: Option<usize>,
    /// KernelSHAP budget per explanation.
    #[arg(long)]
    pub kernel_samples: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Explainer checkpoint timed for amortized inference; a fresh SimSHAP
    /// explainer of the default size when absent.
    #[arg(long, value_name = "FILE")]
    pub explainer: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct BenchArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub params: BenchParams,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}
