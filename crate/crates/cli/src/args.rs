use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use elephant_core::eval::SweepAxis;
use elephant_core::Family;

/// Elephant/mouse flow classification: labeling, training, cross-validation,
/// hyperparameter sweeps and model comparison.
///
/// Every flag can also be set through an `ELEPHANT_`-prefixed environment
/// variable (`ELEPHANT_EPOCHS`, `ELEPHANT_OUT_DIR`, ...); flags win.
#[derive(Debug, Parser)]
#[command(name = "elephant", version, propagate_version = true)]
pub struct Cli {
    /// More log output (-v info, -vv debug); `RUST_LOG` overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label a flow table with the elephant/mouse heuristic.
    Label(LabelArgs),
    /// Train a model on a labeled table and save it with its history.
    Train(TrainArgs),
    /// Stratified k-fold cross-validation.
    Cv(CvArgs),
    /// Accuracy over a list of epoch counts or batch sizes.
    Sweep(SweepArgs),
    /// Side-by-side accuracy, runtime, loss and size of the model families.
    Compare(CompareArgs),
    /// Score a table with a saved model.
    Predict(PredictArgs),
    /// Write a synthetic, separable labeled table.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Directory receiving every output file.
    #[arg(long, env = "ELEPHANT_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Preset name (nims, sdn, unicauca, generic) or a TOML schema file.
    /// Without it the header is taken as is: `class` is the label column and
    /// every other column is a numeric feature.
    #[arg(long, env = "ELEPHANT_SCHEMA")]
    pub schema: Option<String>,

    /// Drop rows with unparseable or non-finite cells instead of failing.
    #[arg(long, env = "ELEPHANT_DROP_BAD_ROWS")]
    pub drop_bad_rows: bool,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// dnn, cnn, lstm, autoencoder (ae) or all.
    #[arg(long, env = "ELEPHANT_FAMILY", default_value = "dnn")]
    pub family: FamilyArg,

    /// TOML model configuration; flags override its values.
    #[arg(long, env = "ELEPHANT_CONFIG")]
    pub config: Option<PathBuf>,

    #[arg(long, env = "ELEPHANT_EPOCHS")]
    pub epochs: Option<usize>,

    #[arg(long, env = "ELEPHANT_BATCH")]
    pub batch: Option<usize>,

    /// Adam learning rate.
    #[arg(long, env = "ELEPHANT_LR")]
    pub lr: Option<f64>,

    #[arg(long, env = "ELEPHANT_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Dnn,
    Cnn,
    Lstm,
    #[value(alias = "ae")]
    Autoencoder,
    All,
}

impl FamilyArg {
    pub fn families(self) -> Vec<Family> {
        match self {
            FamilyArg::Dnn => vec![Family::Dnn],
            FamilyArg::Cnn => vec![Family::Cnn],
            FamilyArg::Lstm => vec![Family::Lstm],
            FamilyArg::Autoencoder => vec![Family::Autoencoder],
            FamilyArg::All => Family::ALL.to_vec(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyArg::Dnn => "dnn",
            FamilyArg::Cnn => "cnn",
            FamilyArg::Lstm => "lstm",
            FamilyArg::Autoencoder => "autoencoder",
            FamilyArg::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Epochs,
    Batch,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Epochs => SweepAxis::Epochs,
            AxisArg::Batch => SweepAxis::Batch,
        }
    }
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Flow table, with or without a class column.
    pub input: PathBuf,

    /// TOML labeling policy; defaults to the built-in thresholds.
    #[arg(long, env = "ELEPHANT_POLICY")]
    pub policy: Option<PathBuf>,

    /// Labeled table; defaults to `<out-dir>/<input stem>_labeled.csv`.
    #[arg(short, long)]
    pub output: Option<PathBuf>,

    /// Preset name (nims, sdn, unicauca) or a TOML schema file mapping the
    /// duration, packet and byte columns.
    #[arg(long, env = "ELEPHANT_SCHEMA")]
    pub schema: Option<String>,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled flow table.
    pub input: PathBuf,

    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    /// Labeled flow table.
    pub input: PathBuf,

    #[arg(long, env = "ELEPHANT_FOLDS", default_value_t = 10)]
    pub folds: usize,

    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Labeled flow table.
    pub input: PathBuf,

    #[arg(long, env = "ELEPHANT_AXIS")]
    pub axis: AxisArg,

    /// Comma-separated values; defaults to 5,10,20,50,100,1000 epochs
    /// (batch 512) or batch sizes 32,64,128,512,1024 (50 epochs). `--batch`
    /// or `--epochs` replaces the held-fixed value.
    #[arg(long, env = "ELEPHANT_VALUES", value_delimiter = ',')]
    pub values: Option<Vec<usize>>,

    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// One or more labeled flow tables.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,

    /// Score by k-fold cross-validation instead of a single stratified
    /// 90/10 hold-out.
    #[arg(long, env = "ELEPHANT_FOLDS")]
    pub folds: Option<usize>,

    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model file written by `train`.
    pub model: PathBuf,

    /// Flow table with the model's feature columns; a class column is
    /// optional and enables an accuracy summary.
    pub input: PathBuf,

    /// Defaults to `<out-dir>/predictions_<family>.csv`.
    #[arg(short, long)]
    pub output: Option<PathBuf>,

    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    pub rows: usize,

    #[arg(long, default_value_t = 20)]
    pub features: usize,

    /// Fraction of rows labeled elephant.
    #[arg(long, default_value_t = 0.1)]
    pub elephant_share: f64,

    #[arg(long, env = "ELEPHANT_SEED")]
    pub seed: Option<u64>,

    /// Defaults to `<out-dir>/fixture.csv`.
    #[arg(short, long)]
    pub output: Option<PathBuf>,

    #[command(flatten)]
    pub out: OutArgs,
}
