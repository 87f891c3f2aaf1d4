use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::cv::fit_and_score;
use super::folds::stratified_kfold;
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;
use crate::models::{Family, ModelConfig};

pub const DEFAULT_EPOCHS: [usize; 6] = [5, 10, 20, 50, 100, 1000];
/// Batch size held fixed during the epoch sweep.
pub const EPOCH_SWEEP_BATCH: usize = 512;
pub const DEFAULT_BATCHES: [usize; 5] = [32, 64, 128, 512, 1024];
/// Epoch count held fixed during the batch sweep.
pub const BATCH_SWEEP_EPOCHS: usize = 50;
/// The sweeps score on the first fold of this many stratified folds.
pub const SWEEP_FOLDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Epochs,
    Batch,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Epochs => "epochs",
            SweepAxis::Batch => "batch",
        }
    }

    pub fn default_values(self) -> Vec<usize> {
        match self {
            SweepAxis::Epochs => DEFAULT_EPOCHS.to_vec(),
            SweepAxis::Batch => DEFAULT_BATCHES.to_vec(),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epochs" | "epoch" => Ok(SweepAxis::Epochs),
            "batch" | "batch_size" => Ok(SweepAxis::Batch),
            _ => Err(Error::Config(format!("unknown sweep axis '{s}' (epochs, batch)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: usize,
    pub accuracy: f64,
    pub final_loss: f64,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub family: Family,
    pub axis: SweepAxis,
    /// Epochs (batch sweep) or batch size (epoch sweep) held fixed.
    pub fixed: usize,
    pub seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    /// In the order the values were given.
    pub points: Vec<SweepPoint>,
    pub manifest_id: Option<String>,
}

impl SweepTable {
    /// Columns: `epochs` or `batch`, then accuracy.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([self.axis.as_str(), "accuracy"])?;
        for p in &self.points {
            w.write_record([p.value.to_string(), p.accuracy.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_timing_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([self.axis.as_str(), "seconds"])?;
        for p in &self.points {
            w.write_record([p.value.to_string(), format!("{:.3}", p.seconds)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Accuracy on the first of [`SWEEP_FOLDS`] stratified folds for each epoch
/// count, batch size fixed at `batch`.
pub fn epoch_sweep(data: &FeatureMatrix, base: &ModelConfig, epochs: &[usize], batch: usize) -> Result<SweepTable> {
    run(data, base, SweepAxis::Epochs, epochs, batch)
}

/// Accuracy on the first of [`SWEEP_FOLDS`] stratified folds for each batch
/// size, epochs fixed at `epochs`.
pub fn batch_sweep(data: &FeatureMatrix, base: &ModelConfig, batches: &[usize], epochs: usize) -> Result<SweepTable> {
    run(data, base, SweepAxis::Batch, batches, epochs)
}

fn run(
    data: &FeatureMatrix,
    base: &ModelConfig,
    axis: SweepAxis,
    values: &[usize],
    fixed: usize,
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::Config(format!("no {axis} values to sweep")));
    }
    if let Some(bad) = values.iter().chain([&fixed]).find(|&&v| v == 0) {
        return Err(Error::Config(format!("sweep values must be >= 1, got {bad}")));
    }
    let plan = stratified_kfold(data.require_labels()?, SWEEP_FOLDS.min(data.n_rows()), base.seed)?;
    let train = data.select_rows(&plan.train_indices(0));
    let test = data.select_rows(&plan.test_indices(0));
    let mut points = Vec::with_capacity(values.len());
    for &v in values {
        let cfg = match axis {
            SweepAxis::Epochs => ModelConfig { epochs: v, batch_size: fixed, ..base.clone() },
            SweepAxis::Batch => ModelConfig { epochs: fixed, batch_size: v, ..base.clone() },
        };
        let o = fit_and_score(&cfg, &train, &test)?;
        log::info!("{} {axis}={v}: accuracy {:.6}", base.family, o.accuracy);
        points.push(SweepPoint { value: v, accuracy: o.accuracy, final_loss: o.final_loss, seconds: o.seconds });
    }
    Ok(SweepTable {
        family: base.family,
        axis,
        fixed,
        seed: base.seed,
        train_rows: train.n_rows(),
        test_rows: test.n_rows(),
        points,
        manifest_id: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{separable_fixture, FixtureConfig};

    fn fixture() -> FeatureMatrix {
        separable_fixture(&FixtureConfig { rows: 200, features: 5, elephant_share: 0.2, seed: 2 }).unwrap()
    }

    #[test]
    fn one_row_per_value_in_order() {
        let data = fixture();
        let base = ModelConfig::new(Family::Dnn, 5);
        let t = epoch_sweep(&data, &base, &[3, 1], 64).unwrap();
        assert_eq!(t.points.iter().map(|p| p.value).collect::<Vec<_>>(), vec![3, 1]);
        assert_eq!((t.train_rows, t.test_rows), (180, 20));
        assert_eq!(t.to_json().unwrap(), epoch_sweep(&data, &base, &[3, 1], 64).unwrap().to_json().unwrap());
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("epochs,accuracy\n"));
    }

    #[test]
    fn oversized_batch_is_full_batch() {
        let t = batch_sweep(&fixture(), &ModelConfig::new(Family::Dnn, 5), &[100_000], 2).unwrap();
        assert_eq!(t.points.len(), 1);
        assert!(t.points[0].accuracy.is_finite());
    }

    #[test]
    fn rejects_empty_or_zero() {
        let data = fixture();
        let base = ModelConfig::new(Family::Dnn, 5);
        assert!(epoch_sweep(&data, &base, &[], 64).is_err());
        assert!(batch_sweep(&data, &base, &[0], 5).is_err());
        assert!("width".parse::<SweepAxis>().is_err());
        assert_eq!(SweepAxis::Epochs.default_values().len(), 6);
        assert_eq!(SweepAxis::Batch.default_values().len(), 5);
    }
}
