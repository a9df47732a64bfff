use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use wcd_core::trainer::{BatchSize, Schedule};
use wcd_core::EstimatorKind;

#[derive(Debug, Parser)]
#[command(name = "wcd", version, about = "Binary RBM training with (weighted) contrastive divergence")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one of the benchmark datasets, optionally split into train/test.
    GenData(GenDataArgs),
    /// Train one RBM and record its KL trace.
    Train(TrainArgs),
    /// Train every point of a hyperparameter mesh.
    Grid(GridArgs),
    /// Run two estimators with shared hyperparameters over several seeds.
    Compare(CompareArgs),
    /// Exact KL and log-likelihood of a checkpoint on a dataset.
    EvalExact(EvalExactArgs),
    /// Parzen-window uLL of a test set under a sample set.
    EvalParzen(EvalParzenArgs),
    /// Draw Gibbs samples from a checkpoint.
    Sample(SampleArgs),
    /// Target and model probability of every dataset state.
    ExportProfile(ExportProfileArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// BS09, BS16, LSE11, LSE15, P08, P10, Int12, Mult3G or Mult3D.
    #[arg(long)]
    pub name: String,
    /// p_max / p_min of the Gaussian-profile datasets.
    #[arg(long, default_value_t = wcd_core::datasets::DEFAULT_P_RATIO)]
    pub p_ratio: f64,
    /// Defaults to `<NAME>.txt`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fraction of states kept for training; the rest go to --test-out.
    #[arg(long, requires = "test_out")]
    pub split: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[arg(long, requires = "split")]
    pub test_out: Option<PathBuf>,
}

/// Hyperparameters shared by the training commands. Anything left unset
/// falls back to the config file and then to the built-in defaults.
#[derive(Debug, Args, Default, Clone)]
pub struct TrainOverrides {
    /// TOML file with TrainConfig keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Std of the Gaussian weight initialization.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// fixed or linear.
    #[arg(long)]
    pub schedule: Option<Schedule>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub decay: Option<f64>,
    /// Mini-batch size or `full`.
    #[arg(long)]
    pub batch: Option<BatchSize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Epochs between exact KL evaluations.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Largest visible width enumerated exactly.
    #[arg(long)]
    pub enumeration_limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    /// cd, wcd, pcd, wpcd or exact (`cd10` style names also accepted).
    #[arg(long)]
    pub estimator: Option<EstimatorKind>,
    /// Gibbs steps for cd and wcd.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub train: TrainOverrides,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// TOML mesh: hidden_multipliers, init_sigmas, learning_rates, momenta,
    /// schedules and optionally repetitions.
    #[arg(long)]
    pub mesh: PathBuf,
    /// Seeds per configuration (overrides the mesh's repetitions).
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub train: TrainOverrides,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Two estimators, e.g. `cd1,wcd1`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub estimators: Vec<EstimatorKind>,
    /// Hidden sizes as multiples of the visible size; defaults to the
    /// configured hidden size only.
    #[arg(long, value_delimiter = ',')]
    pub hidden_multipliers: Vec<usize>,
    /// Number of seeds, counted up from the configured seed.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub train: TrainOverrides,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalExactArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = wcd_core::DEFAULT_ENUMERATION_LIMIT)]
    pub enumeration_limit: usize,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = wcd_core::parzen::DEFAULT_BURN_IN)]
    pub burn_in: usize,
    #[arg(long, default_value_t = wcd_core::parzen::DEFAULT_THINNING)]
    pub thin: usize,
    #[arg(long, default_value_t = wcd_core::parzen::DEFAULT_CHAINS)]
    pub chains: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalParzenArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Dataset-format file with the test states.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value_t = wcd_core::parzen::DEFAULT_SIGMA)]
    pub sigma: f64,
    /// Sample counts at which to report the uLL; defaults to all samples.
    #[arg(long, value_delimiter = ',')]
    pub points: Vec<usize>,
    /// CSV with columns n_samples,ull.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportProfileArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// One row per state of the whole visible space instead of the dataset.
    #[arg(long)]
    pub full_space: bool,
    #[arg(long, default_value_t = wcd_core::DEFAULT_ENUMERATION_LIMIT)]
    pub enumeration_limit: usize,
}
