use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "lcroll", version, about = "Learning-curve extrapolation with rollout models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic learning-curve benchmark.
    Generate(GenerateArgs),
    /// Split a dataset and train a model on the training side.
    Train(TrainArgs),
    /// Extend one partially observed curve with sampled rollouts.
    Rollout(RolloutArgs),
    /// Score trained models (plus the last-seen-value baseline) on a dataset.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKindArg {
    Vrnn,
    Rf,
    Rfb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchedulerArg {
    Cos,
    Exp,
    Const,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizeArg {
    None,
    Minmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SubsetArg {
    /// Test side of the training split when the dataset is the one trained
    /// on, every curve otherwise.
    Auto,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub configs: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: u64,
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Output format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub model: ModelKindArg,
    #[arg(long)]
    pub data: PathBuf,
    /// Dataset format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.25)]
    pub test_fraction: f64,
    #[arg(long, value_enum, default_value_t = NormalizeArg::None)]
    pub normalize: NormalizeArg,

    /// Lagged values per step (rf only, default 4).
    #[arg(long, help_heading = "Forest")]
    pub window: Option<usize>,
    #[arg(long, help_heading = "Forest")]
    pub trees: Option<usize>,
    #[arg(long, help_heading = "Forest")]
    pub max_depth: Option<usize>,
    #[arg(long, help_heading = "Forest")]
    pub min_samples_leaf: Option<usize>,
    /// Fraction of features tried at each split.
    #[arg(long, help_heading = "Forest")]
    pub feature_fraction: Option<f64>,
    #[arg(long, help_heading = "Forest")]
    pub no_bootstrap: bool,

    #[arg(long, help_heading = "VRNN")]
    pub lstm_units: Option<usize>,
    #[arg(long, help_heading = "VRNN")]
    pub mlp_units: Option<usize>,
    #[arg(long, help_heading = "VRNN")]
    pub config_mlp_units: Option<usize>,
    #[arg(long, help_heading = "VRNN")]
    pub stacked_lstms: Option<usize>,
    #[arg(long, help_heading = "VRNN")]
    pub mlp_layers: Option<usize>,
    #[arg(long, help_heading = "VRNN")]
    pub config_mlp_layers: Option<usize>,
    #[arg(long, help_heading = "VRNN")]
    pub dropout: Option<f64>,
    #[arg(long, help_heading = "VRNN")]
    pub batch: Option<usize>,
    #[arg(long, help_heading = "VRNN")]
    pub lr: Option<f64>,
    #[arg(long, help_heading = "VRNN")]
    pub final_lr_fraction: Option<f64>,
    #[arg(long, help_heading = "VRNN")]
    pub momentum: Option<f64>,
    #[arg(long, value_enum, help_heading = "VRNN")]
    pub scheduler: Option<SchedulerArg>,
    #[arg(long, help_heading = "VRNN")]
    pub train_epochs: Option<usize>,
    #[arg(long, help_heading = "VRNN")]
    pub curriculum_start: Option<usize>,
}

impl TrainArgs {
    /// Names of the forest-only flags that were given.
    pub fn forest_flags(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.window.is_some() {
            v.push("--window");
        }
        if self.trees.is_some() {
            v.push("--trees");
        }
        if self.max_depth.is_some() {
            v.push("--max-depth");
        }
        if self.min_samples_leaf.is_some() {
            v.push("--min-samples-leaf");
        }
        if self.feature_fraction.is_some() {
            v.push("--feature-fraction");
        }
        if self.no_bootstrap {
            v.push("--no-bootstrap");
        }
        v
    }

    /// Names of the VRNN-only flags that were given.
    pub fn vrnn_flags(&self) -> Vec<&'static str> {
        let given = [
            ("--lstm-units", self.lstm_units.is_some()),
            ("--mlp-units", self.mlp_units.is_some()),
            ("--config-mlp-units", self.config_mlp_units.is_some()),
            ("--stacked-lstms", self.stacked_lstms.is_some()),
            ("--mlp-layers", self.mlp_layers.is_some()),
            ("--config-mlp-layers", self.config_mlp_layers.is_some()),
            ("--dropout", self.dropout.is_some()),
            ("--batch", self.batch.is_some()),
            ("--lr", self.lr.is_some()),
            ("--final-lr-fraction", self.final_lr_fraction.is_some()),
            ("--momentum", self.momentum.is_some()),
            ("--scheduler", self.scheduler.is_some()),
            ("--train-epochs", self.train_epochs.is_some()),
            ("--curriculum-start", self.curriculum_start.is_some()),
        ];
        given.into_iter().filter(|(_, g)| *g).map(|(n, _)| n).collect()
    }
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long)]
    pub curve: String,
    #[arg(long)]
    pub observed: usize,
    /// Last epoch to predict; defaults to the curve length.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub rollouts: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Summary CSV (`epoch,mean,variance`).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-trajectory CSV (`epoch,rollout_idx,value`).
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model file, optionally as `name=path`. Repeatable.
    #[arg(long = "model", required = true)]
    pub models: Vec<String>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, value_delimiter = ',', default_values_t = [4usize, 8, 16, 32])]
    pub observed: Vec<usize>,
    /// Target epochs; every epoch after the observed prefix when omitted.
    #[arg(long, value_delimiter = ',')]
    pub target: Vec<usize>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub rollouts: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SubsetArg::Auto)]
    pub subset: SubsetArg,
    /// Leave out the last-seen-value baseline.
    #[arg(long)]
    pub no_lsv: bool,
    /// Output directory for report.json and the plot CSVs.
    #[arg(long)]
    pub out: PathBuf,
}
