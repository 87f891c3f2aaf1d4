//! Stratified cross-validation, confusion matrices, epoch and batch sweeps,
//! and the model-comparison report.

mod compare;
mod cv;
mod folds;
mod metrics;
mod sweep;

pub use compare::{compare_models, count_parameters, format_runtime, CompareMode, ComparisonReport, ComparisonRow};
pub use cv::{cross_validate, fit_and_score, EvalReport, FoldResult, Outcome};
pub use folds::{stratified_kfold, FoldPlan};
pub use metrics::{accuracy, mean_std, ConfusionMatrix};
pub use sweep::{
    batch_sweep, epoch_sweep, SweepAxis, SweepPoint, SweepTable, BATCH_SWEEP_EPOCHS, DEFAULT_BATCHES, DEFAULT_EPOCHS,
    EPOCH_SWEEP_BATCH, SWEEP_FOLDS,
};
