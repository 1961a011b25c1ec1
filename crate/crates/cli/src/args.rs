//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use decorr_core::decorr::DecorrConfig;
use decorr_core::model::{ModelConfig, ModelKind, Norm};
use decorr_core::train::TrainConfig;
use decorr_core::Graph;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "decorr", version, about = "Overcorrelation studies and DeCorr training for deep GNNs")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model, one run per seed.
    Train(TrainCmd),
    /// Run a grid of training configurations and aggregate the results.
    Sweep(SweepCmd),
    /// Corr of repeatedly propagated random features, full graph and LCC.
    PrelimProp(PropCmd),
    /// Corr of random features through an untrained MLP.
    PrelimTrans(TransCmd),
    /// Corr and SMV of a matrix stored as CSV.
    Metrics(MetricsCmd),
    /// Render SVG charts from run JSON, sweep summaries or study CSVs.
    Plot(PlotCmd),
}

#[derive(Clone, Debug, Args)]
pub struct DataArgs {
    /// GNNB file; relative names are also looked up in the data directory.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Synthetic graph recipe, e.g. `sbm:sizes=400/400,p_in=0.05,p_out=0.005`.
    #[arg(long)]
    pub synthetic: Option<String>,
    #[arg(long, env = "DECORR_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// Seed for sampling synthetic graphs.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    /// Seed for the Planetoid split of datasets that carry none.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Zero the features of validation and test nodes.
    #[arg(long)]
    pub missing_features: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Gcn,
    Cheby,
    Mlp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormArg {
    None,
    Batch,
    Pair,
}

/// Named settings of the regularisation weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// alpha = beta = 0.
    None,
    /// alpha = 0.1, beta = 1.
    Decorr,
    /// Decorrelation only: alpha = 0.1, beta = 0.
    DecorrAlpha,
    /// Mutual information only: alpha = 0, beta = 1.
    DecorrBeta,
}

impl Preset {
    fn weights(self) -> (f64, f64) {
        match self {
            Preset::None => (0.0, 0.0),
            Preset::Decorr => (0.1, 1.0),
            Preset::DecorrAlpha => (0.1, 0.0),
            Preset::DecorrBeta => (0.0, 1.0),
        }
    }
}

/// Model and optimisation settings shared by `train` and `sweep`. Field names
/// double as sweep-grid keys.
#[derive(Clone, Debug, Args, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::Gcn)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub layers: u64,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    pub hidden: u64,
    #[arg(long, value_enum, default_value_t = NormArg::None)]
    pub norm: NormArg,
    #[arg(long)]
    pub residual: bool,
    /// Fraction of edges dropped each epoch.
    #[arg(long, default_value_t = 0.0)]
    pub dropedge: f64,
    /// Sets alpha and beta; explicit --alpha / --beta take precedence.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// The MI loss applies to hidden layers t, 2t, ...
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub t: u64,
    /// Monte-Carlo node count for the decorrelation loss (default: ceil(sqrt(N))).
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long)]
    pub mi_batch: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.6)]
    pub dropout: f64,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: u64,
    #[arg(long, default_value_t = 2)]
    pub cheby_order: u64,
    #[arg(long, default_value_t = 1.0)]
    pub pairnorm_scale: f64,
    /// Record Corr and SMV of the logits every this many epochs.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub metrics_every: u64,
}

impl Default for TrainArgs {
    fn default() -> Self {
        #[derive(Parser)]
        struct Wrapper {
            #[command(flatten)]
            args: TrainArgs,
        }
        Wrapper::parse_from(["decorr"]).args
    }
}

impl TrainArgs {
    /// `(alpha, beta)` after applying the preset and explicit overrides.
    pub fn weights(&self) -> (f64, f64) {
        let (a, b) = self.preset.map_or((0.0, 0.0), Preset::weights);
        (self.alpha.unwrap_or(a), self.beta.unwrap_or(b))
    }

    /// Method label used in tables: `none`, `decorr`, `decorr-alpha` or `decorr-beta`.
    pub fn method(&self) -> &'static str {
        match self.weights() {
            (a, b) if a > 0.0 && b > 0.0 => "decorr",
            (a, _) if a > 0.0 => "decorr-alpha",
            (_, b) if b > 0.0 => "decorr-beta",
            _ => "none",
        }
    }

    pub fn to_config(&self, g: &Graph, seed: u64) -> Result<TrainConfig> {
        let kind = match self.model {
            ModelArg::Gcn => ModelKind::Gcn,
            ModelArg::Cheby => ModelKind::Cheby,
            ModelArg::Mlp => ModelKind::Mlp,
        };
        if g.num_classes() == 0 {
            return Err(CliError::Data("dataset has no class labels".into()));
        }
        let mut model = ModelConfig::new(kind, self.layers as usize, g.features().cols(), g.num_classes());
        model.hidden = self.hidden as usize;
        model.norm = match self.norm {
            NormArg::None => Norm::None,
            NormArg::Batch => Norm::Batch,
            NormArg::Pair => Norm::Pair,
        };
        model.residual = self.residual;
        model.dropout = self.dropout;
        model.cheby_order = self.cheby_order as usize;
        model.pairnorm_scale = self.pairnorm_scale;
        let (alpha, beta) = self.weights();
        let mut cfg = TrainConfig::new(model);
        cfg.decorr = DecorrConfig {
            t: self.t as usize,
            sample_size: self.sample_size,
            mi_batch: self.mi_batch,
            ..DecorrConfig::new(alpha, beta)
        };
        cfg.lr = self.lr;
        cfg.weight_decay = self.weight_decay;
        cfg.epochs = self.epochs as usize;
        cfg.seed = seed;
        cfg.dropedge = self.dropedge;
        cfg.metrics_every = self.metrics_every as usize;
        cfg.validate(g.num_nodes()).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    /// Applies a sweep-grid entry, e.g. `("layers", 15)` or `("preset", "decorr")`.
    pub fn set(&mut self, key: &str, value: &Value) -> Result<()> {
        let mut obj = serde_json::to_value(&*self).expect("args serialize");
        let map = obj.as_object_mut().expect("args are an object");
        let key = key.replace('-', "_");
        if !map.contains_key(&key) {
            return Err(CliError::Usage(format!("unknown sweep key `{key}`")));
        }
        map.insert(key.clone(), value.clone());
        *self = serde_json::from_value(obj).map_err(|e| CliError::Usage(format!("sweep key `{key}`: {e}")))?;
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Runs with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub repeats: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also write per-epoch records as run_<seed>.csv.
    #[arg(long)]
    pub epoch_csv: bool,
    /// Write wall_secs as 0 so that repeated runs produce identical files.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    /// JSON sweep specification.
    #[arg(long, required_unless_present = "aggregate_only")]
    pub spec: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "sweep")]
    pub out: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub no_timing: bool,
    /// Rebuild summary.csv and table.md from the run files in --out.
    #[arg(long)]
    pub aggregate_only: bool,
}

#[derive(Debug, Args)]
pub struct PropCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 50)]
    pub k_max: usize,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = 100)]
    pub dim: usize,
    /// Also track SMV (exact up to 5000 nodes, sampled beyond).
    #[arg(long)]
    pub smv: bool,
    #[arg(long)]
    pub no_lcc: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "prelim-prop")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransCmd {
    /// Depths to report, comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3, 4, 5, 10, 15, 20])]
    pub depths: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = 1000)]
    pub nodes: usize,
    #[arg(long, default_value_t = 100)]
    pub dim: usize,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    /// Only run the linear variant.
    #[arg(long, conflicts_with = "relu_only")]
    pub linear_only: bool,
    /// Only run the ReLU variant.
    #[arg(long)]
    pub relu_only: bool,
    #[arg(long)]
    pub smv: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "prelim-trans")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsCmd {
    /// CSV matrix, one node per row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PlotCmd {
    /// Run JSON files, sweep summary.csv files or study CSVs.
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value = "plots")]
    pub out: PathBuf,
}
