use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::stratified_kfold;
use super::metrics::{mean_std, ConfusionMatrix};
use crate::ae::{detect, fit_ae_detector, DEFAULT_PERCENTILES};
use crate::error::{Error, Result};
use crate::ingest::{fit_normalizer, FeatureMatrix};
use crate::models::{predict, train_with_normalizer, Family, ModelConfig, TrainedModel};
use crate::seed::derive_seed;

/// Result of training on one split and scoring on its complement.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub final_loss: f64,
    pub threshold: Option<f64>,
    pub seconds: f64,
    pub model: TrainedModel,
}

/// Trains `config.family` on `train` and scores it on `test`. The normalizer
/// is fitted on every training row. Autoencoders are fitted as threshold
/// detectors and scored by reconstruction loss.
pub fn fit_and_score(config: &ModelConfig, train: &FeatureMatrix, test: &FeatureMatrix) -> Result<Outcome> {
    let actual = test.require_labels()?;
    let started = Instant::now();
    let (model, predicted) = match config.family {
        Family::Autoencoder => {
            let (model, _) = fit_ae_detector(train, config, &DEFAULT_PERCENTILES)?;
            let predicted = detect(&model, test)?;
            (model, predicted)
        }
        _ => {
            let normalizer = fit_normalizer(&train.without_labels(), config.normalization)?;
            let model = train_with_normalizer(config, train, Some(normalizer))?;
            let predicted = predict(&model, test)?.into_iter().map(|p| p.label).collect();
            (model, predicted)
        }
    };
    let seconds = started.elapsed().as_secs_f64();
    let confusion = ConfusionMatrix::from_labels(actual, &predicted)?;
    Ok(Outcome {
        accuracy: confusion.accuracy()?,
        confusion,
        final_loss: model.history.last().map_or(f64::NAN, |e| e.train_loss),
        threshold: model.threshold,
        seconds,
        model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    /// 1-based.
    pub fold: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub seed: u64,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub final_loss: f64,
    pub threshold: Option<f64>,
    /// Wall time; kept out of the serialized report.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub family: Family,
    pub k: usize,
    pub seed: u64,
    pub rows: usize,
    pub config: ModelConfig,
    pub folds: Vec<FoldResult>,
    /// Element-wise sum of the fold matrices.
    pub total: ConfusionMatrix,
    pub mean_accuracy: f64,
    /// Sample standard deviation of the fold accuracies.
    pub std_accuracy: f64,
    pub manifest_id: Option<String>,
}

impl EvalReport {
    pub fn total_seconds(&self) -> f64 {
        self.folds.iter().map(|f| f.seconds).sum()
    }

    pub fn mean_final_loss(&self) -> f64 {
        self.folds.iter().map(|f| f.final_loss).sum::<f64>() / self.folds.len() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Columns: fold, train_rows, test_rows, tp, tn, fp, fn, accuracy.
    pub fn write_confusion_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["fold", "train_rows", "test_rows", "tp", "tn", "fp", "fn", "accuracy"])?;
        for f in &self.folds {
            let c = f.confusion;
            w.write_record([
                f.fold.to_string(),
                f.train_rows.to_string(),
                f.test_rows.to_string(),
                c.tp.to_string(),
                c.tn.to_string(),
                c.fp.to_string(),
                c.fn_.to_string(),
                f.accuracy.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Columns: fold, seconds (millisecond resolution).
    pub fn write_timing_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["fold", "seconds"])?;
        for f in &self.folds {
            w.write_record([f.fold.to_string(), format!("{:.3}", f.seconds)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} stratified {}-fold cross-validation, {} rows, seed {}",
            self.family, self.k, self.rows, self.seed
        );
        let _ = writeln!(
            s,
            "{:>4} {:>8} {:>7} {:>7} {:>7} {:>7} {:>7} {:>9}",
            "fold", "train", "test", "tp", "tn", "fp", "fn", "accuracy"
        );
        for f in &self.folds {
            let c = f.confusion;
            let _ = writeln!(
                s,
                "{:>4} {:>8} {:>7} {:>7} {:>7} {:>7} {:>7} {:>9.6}",
                f.fold, f.train_rows, f.test_rows, c.tp, c.tn, c.fp, c.fn_, f.accuracy
            );
        }
        let t = self.total;
        let _ = writeln!(s, "{:>4} {:>8} {:>7} {:>7} {:>7} {:>7} {:>7}", "sum", "", self.rows, t.tp, t.tn, t.fp, t.fn_);
        let _ = writeln!(s, "mean accuracy {:.6} (std {:.6})", self.mean_accuracy, self.std_accuracy);
        s
    }
}

/// Stratified k-fold cross-validation of `config.family` on labeled `data`.
/// Fold `f` trains with seed `derive_seed(config.seed, f)`; folds run in
/// parallel and are reported in fold order; the first failing fold (by
/// index) is the error returned.
pub fn cross_validate(data: &FeatureMatrix, config: &ModelConfig, k: usize) -> Result<EvalReport> {
    let labels = data.require_labels()?;
    let plan = stratified_kfold(labels, k, config.seed)?;
    let folds = (0..k)
        .into_par_iter()
        .map(|f| {
            let train_idx = plan.train_indices(f);
            let test_idx = plan.test_indices(f);
            let cfg = ModelConfig { seed: derive_seed(config.seed, f as u64), ..config.clone() };
            let outcome = fit_and_score(&cfg, &data.select_rows(&train_idx), &data.select_rows(&test_idx))
                .map_err(|e| Error::Fold { fold: f + 1, source: Box::new(e) })?;
            log::info!("{} fold {}/{k}: accuracy {:.6}", config.family, f + 1, outcome.accuracy);
            Ok(FoldResult {
                fold: f + 1,
                train_rows: train_idx.len(),
                test_rows: test_idx.len(),
                seed: cfg.seed,
                confusion: outcome.confusion,
                accuracy: outcome.accuracy,
                final_loss: outcome.final_loss,
                threshold: outcome.threshold,
                seconds: outcome.seconds,
            })
        })
        .collect::<Vec<Result<FoldResult>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&accs);
    Ok(EvalReport {
        family: config.family,
        k,
        seed: config.seed,
        rows: data.n_rows(),
        config: config.clone(),
        total: folds.iter().map(|f| f.confusion).sum(),
        folds,
        mean_accuracy,
        std_accuracy,
        manifest_id: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{separable_fixture, FixtureConfig};

    fn fixture() -> FeatureMatrix {
        separable_fixture(&FixtureConfig { rows: 300, features: 6, elephant_share: 0.2, seed: 11 }).unwrap()
    }

    #[test]
    fn report_structure() {
        let data = fixture();
        let mut cfg = ModelConfig::new(Family::Dnn, 6);
        cfg.epochs = 10;
        cfg.batch_size = 32;
        let r = cross_validate(&data, &cfg, 5).unwrap();
        assert_eq!(r.folds.len(), 5);
        assert_eq!(r.total.total() as usize, data.n_rows());
        assert_eq!(r.folds.iter().map(|f| f.confusion.total() as usize).sum::<usize>(), 300);
        let mean = r.folds.iter().map(|f| f.accuracy).sum::<f64>() / 5.0;
        assert!((r.mean_accuracy - mean).abs() < 1e-15);
        assert!(r.mean_accuracy > 0.9);
        assert_eq!(r.to_json().unwrap(), cross_validate(&data, &cfg, 5).unwrap().to_json().unwrap());
        let mut csv = Vec::new();
        r.write_confusion_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 6);
        assert!(r.to_text().contains("mean accuracy"));
    }

    #[test]
    fn fold_errors_carry_index() {
        // Every elephant leaves the autoencoder without mice to learn from.
        let data = FeatureMatrix::from_rows(
            &(0..40).map(|i| vec![i as f64, 1.0]).collect::<Vec<_>>(),
            Some(vec![crate::FlowLabel::Elephant; 40]),
        )
        .unwrap();
        let err = cross_validate(&data, &ModelConfig::new(Family::Autoencoder, 2), 4).unwrap_err();
        assert!(matches!(err, Error::Fold { fold: 1, .. }), "{err}");
    }
}
