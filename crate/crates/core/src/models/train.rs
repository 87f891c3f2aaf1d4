use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Family, ModelConfig};
use crate::error::{Error, Result};
use crate::flow::FlowLabel;
use crate::ingest::{fit_normalizer, FeatureMatrix, NormalizationParams};
use crate::nn::{AdamConfig, AdamState, Network, Tensor};
use crate::seed::derive_seed;

/// Rows per forward pass when no gradient is needed.
const INFER_CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` for the autoencoder.
    pub train_accuracy: Option<f64>,
    pub val_loss: f64,
    pub val_accuracy: Option<f64>,
    /// Wall time of the epoch; never serialized so model files stay reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub network: Network,
    pub normalizer: NormalizationParams,
    pub feature_names: Vec<String>,
    pub history: TrainingHistory,
    pub total_seconds: f64,
    pub parameter_count: usize,
    /// Reconstruction-loss threshold; set only for a fitted autoencoder detector.
    pub threshold: Option<f64>,
    /// Identifier of the run that produced the model, if any.
    pub manifest_id: Option<String>,
}

impl TrainedModel {
    pub fn family(&self) -> Family {
        self.config.family
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    /// Raw network outputs for already-normalized rows, computed in chunks.
    pub(crate) fn infer_normalized(&self, m: &FeatureMatrix) -> Result<Vec<f64>> {
        infer_rows(&self.network, m, (0..m.n_rows()).collect::<Vec<_>>().as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability: f64,
    pub label: FlowLabel,
}

/// Stratified hold-out split. Each class contributes `round(count * fraction)`
/// rows to the hold-out, capped so that it keeps at least one training row;
/// the hold-out is never empty. Both index lists are sorted.
pub fn split_holdout(
    labels: Option<&[FlowLabel]>,
    n: usize,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::Empty(format!("need at least 2 rows for a hold-out split, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = match labels {
        Some(l) => {
            [FlowLabel::Mouse, FlowLabel::Elephant].iter().map(|&c| (0..n).filter(|&i| l[i] == c).collect()).collect()
        }
        None => vec![(0..n).collect()],
    };
    let mut train = Vec::with_capacity(n);
    let mut held = Vec::new();
    for mut g in groups {
        g.shuffle(&mut rng);
        let take = ((g.len() as f64 * fraction).round() as usize).min(g.len().saturating_sub(1));
        held.extend_from_slice(&g[..take]);
        train.extend_from_slice(&g[take..]);
    }
    if held.is_empty() {
        // Every class has one row or the fraction rounds to zero.
        let pick = train.len() - 1;
        held.push(train.swap_remove(pick));
    }
    if train.is_empty() {
        return Err(Error::Empty("hold-out split left no training rows".into()));
    }
    train.sort_unstable();
    held.sort_unstable();
    Ok((train, held))
}

/// Trains `config.family` on `data`, fitting the normalizer on the training
/// split only.
pub fn train(config: &ModelConfig, data: &FeatureMatrix) -> Result<TrainedModel> {
    train_with_normalizer(config, data, None)
}

/// As [`train`], but with a caller-fitted normalizer when `normalizer` is set.
pub fn train_with_normalizer(
    config: &ModelConfig,
    data: &FeatureMatrix,
    normalizer: Option<NormalizationParams>,
) -> Result<TrainedModel> {
    config.validate()?;
    if data.n_features() != config.input_dim {
        return Err(Error::Shape(format!(
            "config expects {} features, data has {}",
            config.input_dim,
            data.n_features()
        )));
    }
    let supervised = config.family.is_supervised();
    let labels = if supervised { Some(data.require_labels()?) } else { data.labels() };
    let (train_idx, val_idx) =
        split_holdout(labels, data.n_rows(), config.validation_fraction, derive_seed(config.seed, 3))?;

    let normalizer = match normalizer {
        Some(p) => p,
        None => fit_normalizer(&data.select_rows(&train_idx), config.normalization)?,
    };
    let norm = normalizer.apply(data)?;

    // The autoencoder learns the mouse profile unless told otherwise.
    let keep = |idx: Vec<usize>| -> Vec<usize> {
        match (supervised, config.ae_train_on_all, labels) {
            (false, false, Some(l)) => idx.into_iter().filter(|&i| l[i] == FlowLabel::Mouse).collect(),
            _ => idx,
        }
    };
    let mut fit_idx = keep(train_idx);
    let mut val_idx = keep(val_idx);
    if fit_idx.is_empty() {
        return Err(Error::Empty("no training rows left for the autoencoder (no mouse rows)".into()));
    }
    if val_idx.is_empty() {
        // A single mouse row in the hold-out is still a usable monitor.
        val_idx.push(fit_idx.pop().expect("non-empty"));
        if fit_idx.is_empty() {
            return Err(Error::Empty("not enough rows to train and validate".into()));
        }
    }

    let spec = config.network_spec()?;
    let mut network = Network::new(spec, derive_seed(config.seed, 0))?;
    let adam_cfg = AdamConfig { learning_rate: config.learning_rate, ..AdamConfig::default() };
    let mut adam = AdamState::new(network.params(), adam_cfg);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 1));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 2));
    let loss = config.loss();
    let targets = labels.map(|l| l.iter().map(|c| c.as_target()).collect::<Vec<_>>());

    let started = Instant::now();
    let mut history = TrainingHistory::default();
    let mut order = fit_idx.clone();
    for epoch in 1..=config.epochs {
        let t0 = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            let x = gather(&network, &norm, batch)?;
            let y = match (supervised, &targets) {
                (true, Some(t)) => Tensor::new(vec![batch.len(), 1], batch.iter().map(|&i| t[i]).collect())?,
                _ => Tensor::new(vec![batch.len(), norm.n_features()], x.data().to_vec())?,
            };
            let pred = network.forward_train(&x, &mut dropout_rng)?;
            let (l, grad) = loss.evaluate(&pred, &y)?;
            if !l.is_finite() {
                network.clear_cache();
                return Err(Error::Diverged { epoch });
            }
            let grads = network.backward(&grad)?;
            adam.step(network.params_mut(), &grads)?;
            loss_sum += l * batch.len() as f64;
            if supervised {
                correct += count_correct(pred.data(), y.data());
            }
        }
        let train_loss = loss_sum / order.len() as f64;

        let outputs = infer_rows(&network, &norm, &val_idx)?;
        let (val_loss, val_accuracy) = if supervised {
            let t = targets.as_ref().expect("supervised targets");
            let yt: Vec<f64> = val_idx.iter().map(|&i| t[i]).collect();
            let n = yt.len();
            let p = Tensor::new(vec![n, 1], outputs)?;
            let vl = loss.value(&p, &Tensor::new(vec![n, 1], yt.clone())?)?;
            (vl, Some(count_correct(p.data(), &yt) as f64 / n as f64))
        } else {
            let d = norm.n_features();
            let rows = val_idx.len();
            let truth: Vec<f64> = val_idx.iter().flat_map(|&i| norm.row(i).iter().copied()).collect();
            let vl = loss.value(&Tensor::new(vec![rows, d], outputs)?, &Tensor::new(vec![rows, d], truth)?)?;
            (vl, None)
        };
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            train_accuracy: supervised.then(|| correct as f64 / order.len() as f64),
            val_loss,
            val_accuracy,
            seconds: t0.elapsed().as_secs_f64(),
        });
        log::debug!("{} epoch {epoch}: loss {train_loss:.6} val {val_loss:.6}", config.family);
    }

    let parameter_count = network.count_parameters();
    Ok(TrainedModel {
        config: config.clone(),
        network,
        normalizer,
        feature_names: data.feature_names().to_vec(),
        history,
        total_seconds: started.elapsed().as_secs_f64(),
        parameter_count,
        threshold: None,
        manifest_id: None,
    })
}

/// Probability and label (elephant iff probability > 0.5) for every row of
/// raw, unnormalized `features`.
pub fn predict(model: &TrainedModel, features: &FeatureMatrix) -> Result<Vec<Prediction>> {
    if !model.family().is_supervised() {
        return Err(Error::Config("autoencoder predictions go through the reconstruction-threshold detector".into()));
    }
    let norm = model.normalizer.apply(features)?;
    let probs = model.infer_normalized(&norm)?;
    Ok(probs.into_iter().map(|p| Prediction { probability: p, label: FlowLabel::from(p > 0.5) }).collect())
}

fn gather(network: &Network, m: &FeatureMatrix, rows: &[usize]) -> Result<Tensor> {
    let mut shape = vec![rows.len()];
    shape.extend_from_slice(&network.spec().input_shape);
    let mut data = Vec::with_capacity(rows.len() * m.n_features());
    for &i in rows {
        data.extend_from_slice(m.row(i));
    }
    Tensor::new(shape, data)
}

fn infer_rows(network: &Network, m: &FeatureMatrix, rows: &[usize]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for chunk in rows.chunks(INFER_CHUNK) {
        let y = network.infer(&gather(network, m, chunk)?)?;
        out.extend_from_slice(y.data());
    }
    Ok(out)
}

fn count_correct(pred: &[f64], target: &[f64]) -> usize {
    pred.iter().zip(target).filter(|(&p, &t)| (p > 0.5) == (t > 0.5)).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Loss;
    use crate::synth::{separable_fixture, FixtureConfig};

    fn small_fixture() -> FeatureMatrix {
        separable_fixture(&FixtureConfig { rows: 400, features: 8, elephant_share: 0.25, seed: 3 }).unwrap()
    }

    #[test]
    fn holdout_is_stratified_and_disjoint() {
        let labels: Vec<FlowLabel> = (0..100).map(|i| FlowLabel::from(i % 10 == 0)).collect();
        let (tr, va) = split_holdout(Some(&labels), 100, 0.1, 1).unwrap();
        assert_eq!(tr.len() + va.len(), 100);
        assert_eq!(va.len(), 10);
        assert_eq!(va.iter().filter(|&&i| labels[i].is_elephant()).count(), 1);
        let mut all: Vec<usize> = tr.iter().chain(&va).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn holdout_never_empty() {
        let (tr, va) = split_holdout(None, 3, 0.1, 0).unwrap();
        assert_eq!((tr.len(), va.len()), (2, 1));
        assert!(split_holdout(None, 1, 0.1, 0).is_err());
    }

    #[test]
    fn dnn_learns_fixture() {
        let data = small_fixture();
        let mut cfg = ModelConfig::new(Family::Dnn, 8);
        cfg.epochs = 15;
        cfg.batch_size = 32;
        let m = train(&cfg, &data).unwrap();
        assert_eq!(m.history.len(), 15);
        let last = m.history.last().unwrap();
        assert!(last.val_accuracy.unwrap() >= 0.95, "{last:?}");
        assert!(m.history.epochs[0].train_loss > last.train_loss);
        let preds = predict(&m, &data).unwrap();
        let hits = preds.iter().zip(data.labels().unwrap()).filter(|(p, &l)| p.label == l).count();
        assert!(hits as f64 / data.n_rows() as f64 > 0.95);
        assert!(preds.iter().all(|p| (0.0..=1.0).contains(&p.probability)));
    }

    #[test]
    fn autoencoder_history_has_no_accuracy() {
        let data = small_fixture();
        let mut cfg = ModelConfig::new(Family::Autoencoder, 8);
        cfg.epochs = 3;
        let m = train(&cfg, &data).unwrap();
        assert!(m.history.epochs.iter().all(|e| e.train_accuracy.is_none() && e.val_accuracy.is_none()));
        assert!(predict(&m, &data).is_err());
    }

    #[test]
    fn autoencoder_without_mice_fails() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 1.0, 2.0]).collect();
        let data = FeatureMatrix::from_rows(&rows, Some(vec![FlowLabel::Elephant; 20])).unwrap();
        let cfg = ModelConfig::new(Family::Autoencoder, 3);
        assert!(matches!(train(&cfg, &data), Err(Error::Empty(_))));
    }

    #[test]
    fn supervised_needs_labels() {
        let data = small_fixture().without_labels();
        assert!(train(&ModelConfig::new(Family::Dnn, 8), &data).is_err());
    }

    #[test]
    fn huge_learning_rate_diverges_or_trains() {
        let data = small_fixture();
        let mut cfg = ModelConfig::new(Family::Autoencoder, 8);
        cfg.ae_loss = Loss::Mse;
        cfg.learning_rate = 1e300;
        cfg.epochs = 3;
        match train(&cfg, &data) {
            Err(e) => assert!(e.is_divergence(), "{e}"),
            Ok(m) => assert!(m.history.epochs.iter().all(|e| e.train_loss.is_finite())),
        }
    }

    #[test]
    fn same_seed_same_model() {
        let data = small_fixture();
        let mut cfg = ModelConfig::new(Family::Cnn, 8);
        cfg.epochs = 2;
        let a = train(&cfg, &data).unwrap();
        let b = train(&cfg, &data).unwrap();
        assert_eq!(a.network.params(), b.network.params());
        assert_eq!(
            a.history.epochs.iter().map(|e| e.val_loss).collect::<Vec<_>>(),
            b.history.epochs.iter().map(|e| e.val_loss).collect::<Vec<_>>()
        );
        cfg.seed += 1;
        let c = train(&cfg, &data).unwrap();
        assert_ne!(a.network.params(), c.network.params());
    }
}
