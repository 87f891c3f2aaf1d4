use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::cv::{cross_validate, fit_and_score};
use super::folds::stratified_kfold;
use super::sweep::SWEEP_FOLDS;
use crate::error::Result;
use crate::ingest::FeatureMatrix;
use crate::models::{Family, ModelConfig};
use crate::nn::NetworkSpec;

/// Sum of all trainable parameter sizes; batch-norm running statistics are
/// not trainable and are excluded.
pub fn count_parameters(spec: &NetworkSpec) -> Result<usize> {
    spec.count_parameters()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "k")]
pub enum CompareMode {
    /// Train on the first of ten stratified folds' training rows, score on its test rows.
    Holdout,
    /// Mean over a full stratified k-fold run.
    CrossValidate(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub family: Family,
    pub dataset: String,
    pub accuracy: Option<f64>,
    /// Training plus scoring wall time.
    pub runtime_seconds: Option<f64>,
    /// Final training loss (mean over folds under cross-validation).
    pub loss: Option<f64>,
    pub parameters: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub mode: CompareMode,
    pub seed: u64,
    pub rows: Vec<ComparisonRow>,
    pub manifest_id: Option<String>,
}

/// `57s 60ms` style.
pub fn format_runtime(seconds: f64) -> String {
    let ms = (seconds * 1000.0).round() as u64;
    let (m, s, ms) = (ms / 60_000, ms / 1000 % 60, ms % 1000);
    if m > 0 {
        format!("{m}m {s}s {ms}ms")
    } else {
        format!("{s}s {ms}ms")
    }
}

impl ComparisonReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Aligned table with columns family, accuracy, runtime, loss, dataset,
    /// parameters; a failed row shows `ERROR` and its message.
    pub fn to_text(&self) -> String {
        let header = ["family", "accuracy", "runtime", "loss", "dataset", "parameters"];
        let mut cells: Vec<[String; 6]> = vec![header.map(String::from)];
        for r in &self.rows {
            let opt = |v: Option<f64>, p: usize| v.map_or("ERROR".to_string(), |x| format!("{x:.prec$}", prec = p));
            cells.push([
                r.family.to_string(),
                r.accuracy.map_or("ERROR".into(), |a| format!("{:.2}%", a * 100.0)),
                r.runtime_seconds.map_or("-".into(), format_runtime),
                opt(r.loss, 4),
                r.dataset.clone(),
                r.parameters.map_or("-".into(), |p| p.to_string()),
            ]);
        }
        let widths: Vec<usize> = (0..6).map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0)).collect();
        let mut s = String::new();
        for row in &cells {
            let line: Vec<String> = row.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
            let _ = writeln!(s, "{}", line.join("  ").trim_end());
        }
        for r in self.rows.iter().filter(|r| r.error.is_some()) {
            let _ = writeln!(s, "{} on {}: {}", r.family, r.dataset, r.error.as_deref().unwrap_or_default());
        }
        s
    }
}

/// One row per (dataset, family). A family that fails on a dataset gets a row
/// carrying the error; the others still run.
pub fn compare_models(
    datasets: &[(&str, &FeatureMatrix)],
    families: &[Family],
    base: &ModelConfig,
    mode: CompareMode,
) -> Result<ComparisonReport> {
    let mut rows = Vec::new();
    for &(name, data) in datasets {
        for &family in families {
            let cfg = ModelConfig { family, input_dim: data.n_features(), ..base.clone() };
            let parameters = cfg.network_spec().and_then(|s| count_parameters(&s)).ok();
            let scored = match mode {
                CompareMode::Holdout => holdout(data, &cfg),
                CompareMode::CrossValidate(k) => {
                    cross_validate(data, &cfg, k).map(|r| (r.mean_accuracy, r.total_seconds(), r.mean_final_loss()))
                }
            };
            let row = match scored {
                Ok((accuracy, seconds, loss)) => ComparisonRow {
                    family,
                    dataset: name.to_string(),
                    accuracy: Some(accuracy),
                    runtime_seconds: Some(seconds),
                    loss: Some(loss),
                    parameters,
                    error: None,
                },
                Err(e) => {
                    log::warn!("{family} on {name} failed: {e}");
                    ComparisonRow {
                        family,
                        dataset: name.to_string(),
                        accuracy: None,
                        runtime_seconds: None,
                        loss: None,
                        parameters,
                        error: Some(e.to_string()),
                    }
                }
            };
            rows.push(row);
        }
    }
    Ok(ComparisonReport { mode, seed: base.seed, rows, manifest_id: None })
}

fn holdout(data: &FeatureMatrix, cfg: &ModelConfig) -> Result<(f64, f64, f64)> {
    let plan = stratified_kfold(data.require_labels()?, SWEEP_FOLDS.min(data.n_rows()), cfg.seed)?;
    let o = fit_and_score(cfg, &data.select_rows(&plan.train_indices(0)), &data.select_rows(&plan.test_indices(0)))?;
    Ok((o.accuracy, o.seconds, o.final_loss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_dnn;
    use crate::nn::{Activation, LayerSpec};
    use crate::synth::{separable_fixture, FixtureConfig};
    use crate::FlowLabel;

    #[test]
    fn parameter_counts() {
        assert_eq!(count_parameters(&NetworkSpec::new(vec![4], vec![])).unwrap(), 0);
        assert_eq!(
            count_parameters(&NetworkSpec::new(vec![2], vec![LayerSpec::dense(3, Activation::Linear)])).unwrap(),
            9
        );
        assert_eq!(count_parameters(&build_dnn(21).unwrap()).unwrap(), 3521);
    }

    #[test]
    fn runtime_format() {
        assert_eq!(format_runtime(4.0), "4s 0ms");
        assert_eq!(format_runtime(57.06), "57s 60ms");
        assert_eq!(format_runtime(125.5), "2m 5s 500ms");
    }

    #[test]
    fn four_rows_and_isolated_failure() {
        let good = separable_fixture(&FixtureConfig { rows: 200, features: 6, elephant_share: 0.2, seed: 3 }).unwrap();
        let n = good.n_rows();
        let bad = good.clone().with_labels(vec![FlowLabel::Elephant; n]).unwrap();
        let mut base = ModelConfig::new(Family::Dnn, 6);
        base.epochs = 3;
        let r = compare_models(&[("good", &good), ("bad", &bad)], &Family::ALL, &base, CompareMode::Holdout).unwrap();
        assert_eq!(r.rows.len(), 8);
        for row in &r.rows[..4] {
            assert!(row.error.is_none(), "{row:?}");
            assert!(row.accuracy.is_some() && row.loss.is_some() && row.runtime_seconds.is_some());
            let cfg = ModelConfig::new(row.family, 6);
            assert_eq!(row.parameters, Some(cfg.network_spec().unwrap().count_parameters().unwrap()));
        }
        let ae_bad = r.rows.iter().find(|x| x.dataset == "bad" && x.family == Family::Autoencoder).unwrap();
        assert!(ae_bad.error.is_some() && ae_bad.accuracy.is_none());
        let text = r.to_text();
        assert!(text.lines().next().unwrap().split_whitespace().eq([
            "family",
            "accuracy",
            "runtime",
            "loss",
            "dataset",
            "parameters"
        ]));
        assert!(text.contains("ERROR"));
    }
}
