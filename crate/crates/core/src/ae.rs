//! Autoencoder anomaly detector: a reconstruction model of mouse traffic
//! whose per-row reconstruction loss is compared with a swept threshold.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::ConfusionMatrix;
use crate::flow::FlowLabel;
use crate::ingest::{fit_normalizer, FeatureMatrix};
use crate::models::{split_holdout, train_with_normalizer, Family, ModelConfig, TrainedModel};
use crate::nn::{per_sample_msle, Loss};
use crate::seed::derive_seed;

/// Percentiles scanned when none are given.
pub const DEFAULT_PERCENTILES: [u32; 10] = [90, 91, 92, 93, 94, 95, 96, 97, 98, 99];

/// Per-row reconstruction losses, with true labels when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionProfile {
    pub losses: Vec<f64>,
    pub labels: Option<Vec<FlowLabel>>,
}

impl ReconstructionProfile {
    pub fn new(losses: Vec<f64>, labels: Option<Vec<FlowLabel>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != losses.len() {
                return Err(Error::Shape(format!("{} losses vs {} labels", losses.len(), l.len())));
            }
        }
        if let Some(bad) = losses.iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::Numeric(format!("reconstruction loss must be >= 0, got {bad}")));
        }
        Ok(ReconstructionProfile { losses, labels })
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    /// Confusion counts of the detector at `threshold`.
    pub fn confusion_at(&self, threshold: f64) -> Result<ConfusionMatrix> {
        let labels = self.labels.as_ref().ok_or_else(|| Error::Config("profile has no labels".into()))?;
        let mut cm = ConfusionMatrix::default();
        for (&loss, &actual) in self.losses.iter().zip(labels) {
            cm.record(actual, classify_by_threshold(loss, threshold));
        }
        Ok(cm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub percentile: u32,
    pub threshold: f64,
    pub validation_accuracy: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSweepResult {
    /// Ascending by percentile.
    pub rows: Vec<SweepRow>,
    pub best_percentile: u32,
    pub best_threshold: f64,
    pub best_accuracy: f64,
}

impl ThresholdSweepResult {
    pub fn best_row(&self) -> &SweepRow {
        self.rows.iter().find(|r| r.percentile == self.best_percentile).expect("best row is one of the rows")
    }

    /// Columns: percentile, threshold, validation_accuracy, best (1 on the chosen row).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["percentile", "threshold", "validation_accuracy", "best"])?;
        for r in &self.rows {
            w.write_record([
                r.percentile.to_string(),
                r.threshold.to_string(),
                r.validation_accuracy.to_string(),
                u8::from(r.percentile == self.best_percentile).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Elephant iff `loss > threshold`.
pub fn classify_by_threshold(loss: f64, threshold: f64) -> FlowLabel {
    FlowLabel::from(loss > threshold)
}

/// Linear-interpolation percentile of `losses`: position `p/100 * (n-1)` in
/// sorted order, so `p = 0` is the minimum and `p = 100` the maximum.
pub fn percentile_threshold(losses: &[f64], p: f64) -> Result<f64> {
    let mut sorted = losses.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, p)
}

fn percentile_sorted(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Empty("percentile of no values".into()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::Config(format!("percentile {p} outside [0, 100]")));
    }
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Per-row reconstruction loss of raw `rows` under `model`, which must be an
/// autoencoder. Rows are normalized with the model's stored parameters.
pub fn reconstruction_losses(model: &TrainedModel, rows: &FeatureMatrix) -> Result<ReconstructionProfile> {
    if model.family() != Family::Autoencoder {
        return Err(Error::Config(format!("{} is not an autoencoder", model.family())));
    }
    let norm = model.normalizer.apply(rows)?;
    let out = model.infer_normalized(&norm)?;
    let d = norm.n_features();
    let losses = out
        .chunks_exact(d)
        .zip(norm.rows())
        .map(|(recon, input)| match model.config.ae_loss {
            Loss::Mse => Ok(recon.iter().zip(input).map(|(o, t)| (o - t) * (o - t)).sum::<f64>() / d as f64),
            _ => per_sample_msle(recon, input),
        })
        .collect::<Result<Vec<_>>>()?;
    ReconstructionProfile::new(losses, rows.labels().map(<[FlowLabel]>::to_vec))
}

/// Scores each percentile's threshold over the profile's own losses and picks
/// the most accurate; ties go to the lowest percentile.
pub fn sweep_profile(profile: &ReconstructionProfile, percentiles: &[u32]) -> Result<ThresholdSweepResult> {
    if percentiles.is_empty() {
        return Err(Error::Config("no percentiles to sweep".into()));
    }
    let labels = profile.labels.as_ref().ok_or_else(|| Error::Config("validation profile has no labels".into()))?;
    let elephants = labels.iter().filter(|l| l.is_elephant()).count();
    if elephants == 0 || elephants == labels.len() {
        return Err(Error::Config("threshold sweep needs both classes in the validation set".into()));
    }
    let mut ps = percentiles.to_vec();
    ps.sort_unstable();
    ps.dedup();
    let mut sorted = profile.losses.clone();
    sorted.sort_by(f64::total_cmp);

    let mut rows = Vec::with_capacity(ps.len());
    for p in ps {
        let threshold = percentile_sorted(&sorted, p as f64)?;
        let confusion = profile.confusion_at(threshold)?;
        rows.push(SweepRow { percentile: p, threshold, validation_accuracy: confusion.accuracy()?, confusion });
    }
    let mut best = &rows[0];
    for r in &rows[1..] {
        if r.validation_accuracy > best.validation_accuracy {
            best = r;
        }
    }
    Ok(ThresholdSweepResult {
        best_percentile: best.percentile,
        best_threshold: best.threshold,
        best_accuracy: best.validation_accuracy,
        rows,
    })
}

/// [`reconstruction_losses`] on labeled `validation` followed by [`sweep_profile`].
pub fn sweep_thresholds(
    model: &TrainedModel,
    validation: &FeatureMatrix,
    percentiles: &[u32],
) -> Result<ThresholdSweepResult> {
    validation.require_labels()?;
    sweep_profile(&reconstruction_losses(model, validation)?, percentiles)
}

/// Labels raw `rows` with a fitted detector's stored threshold.
pub fn detect(model: &TrainedModel, rows: &FeatureMatrix) -> Result<Vec<FlowLabel>> {
    let threshold = model.threshold.ok_or_else(|| Error::State("autoencoder has no fitted threshold".into()))?;
    let profile = reconstruction_losses(model, rows)?;
    Ok(profile.losses.iter().map(|&l| classify_by_threshold(l, threshold)).collect())
}

/// Splits `data` into a training part and a stratified, mixed validation
/// part, trains the autoencoder on the training mice (labels stripped),
/// sweeps `percentiles` over the validation losses and stores the best
/// threshold on the returned model.
pub fn fit_ae_detector(
    data: &FeatureMatrix,
    config: &ModelConfig,
    percentiles: &[u32],
) -> Result<(TrainedModel, ThresholdSweepResult)> {
    if config.family != Family::Autoencoder {
        return Err(Error::Config(format!("fit_ae_detector needs the autoencoder family, got {}", config.family)));
    }
    let labels = data.require_labels()?;
    if !labels.contains(&FlowLabel::Mouse) {
        return Err(Error::Empty("no mouse rows to learn the normal profile from".into()));
    }
    let (train_idx, val_idx) =
        split_holdout(Some(labels), data.n_rows(), config.validation_fraction, derive_seed(config.seed, 4))?;
    let train_rows = data.select_rows(&train_idx);
    let validation = data.select_rows(&val_idx);
    // Scaling is fitted on every training row so that elephants in the
    // validation split stay near the unit range the decoder can emit.
    let normalizer = fit_normalizer(&train_rows.without_labels(), config.normalization)?;
    let mut model = train_with_normalizer(config, &train_rows, Some(normalizer))?;
    let sweep = sweep_thresholds(&model, &validation, percentiles)?;
    model.threshold = Some(sweep.best_threshold);
    Ok((model, sweep))
}
