//! The four detector architectures and their training loop.

mod persist;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::NormalizationMethod;
use crate::nn::{Activation, LayerSpec, Loss, NetworkSpec};

pub use persist::{ModelFile, MODEL_FORMAT, MODEL_VERSION};
pub use train::{
    predict, split_holdout, train, train_with_normalizer, EpochRecord, Prediction, TrainedModel, TrainingHistory,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Dnn,
    Cnn,
    Lstm,
    Autoencoder,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Dnn, Family::Cnn, Family::Lstm, Family::Autoencoder];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Dnn => "dnn",
            Family::Cnn => "cnn",
            Family::Lstm => "lstm",
            Family::Autoencoder => "autoencoder",
        }
    }

    pub fn is_supervised(self) -> bool {
        self != Family::Autoencoder
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dnn" => Ok(Family::Dnn),
            "cnn" => Ok(Family::Cnn),
            "lstm" => Ok(Family::Lstm),
            "autoencoder" | "ae" => Ok(Family::Autoencoder),
            _ => Err(Error::Config(format!("unknown family '{s}' (dnn, cnn, lstm, autoencoder)"))),
        }
    }
}

/// Layer widths and regularization knobs. None of these are fixed by the
/// training protocol; the defaults are documented choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub dnn_hidden: Vec<usize>,
    pub cnn_filters: usize,
    pub cnn_kernel: usize,
    pub cnn_pool: usize,
    pub cnn_dense: usize,
    pub dropout: f64,
    pub lstm_units: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            dnn_hidden: vec![64, 32],
            cnn_filters: 32,
            cnn_kernel: 3,
            cnn_pool: 2,
            cnn_dense: 32,
            dropout: 0.2,
            lstm_units: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub family: Family,
    pub input_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Share of the training rows held out for per-epoch validation.
    pub validation_fraction: f64,
    pub normalization: NormalizationMethod,
    /// Reconstruction loss of the autoencoder (`msle`, or `mse`).
    pub ae_loss: Loss,
    /// Train the autoencoder on every training row instead of mice only.
    pub ae_train_on_all: bool,
    pub architecture: Architecture,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            family: Family::Dnn,
            input_dim: 1,
            epochs: 50,
            batch_size: 128,
            learning_rate: 0.01,
            seed: crate::DEFAULT_SEED,
            validation_fraction: 0.1,
            normalization: NormalizationMethod::MinMax,
            ae_loss: Loss::Msle,
            ae_train_on_all: false,
            architecture: Architecture::default(),
        }
    }
}

impl ModelConfig {
    pub fn new(family: Family, input_dim: usize) -> Self {
        ModelConfig { family, input_dim, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config("validation_fraction must lie in (0, 1)".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.family == Family::Autoencoder && self.ae_loss == Loss::Bce {
            return Err(Error::Config("autoencoder loss must be msle or mse".into()));
        }
        Ok(())
    }

    /// The network this configuration describes.
    pub fn network_spec(&self) -> Result<NetworkSpec> {
        build(self.family, self.input_dim, &self.architecture)
    }

    /// Loss optimized for this family.
    pub fn loss(&self) -> Loss {
        match self.family {
            Family::Autoencoder => self.ae_loss,
            _ => Loss::Bce,
        }
    }
}

pub fn build(family: Family, input_dim: usize, arch: &Architecture) -> Result<NetworkSpec> {
    match family {
        Family::Dnn => build_dnn_with(input_dim, arch),
        Family::Cnn => build_cnn_with(input_dim, arch),
        Family::Lstm => build_lstm_with(input_dim, arch),
        Family::Autoencoder => build_autoencoder(input_dim),
    }
}

/// Dense(64, relu) -> Dense(32, relu) -> Dense(1, sigmoid).
pub fn build_dnn(input_dim: usize) -> Result<NetworkSpec> {
    build_dnn_with(input_dim, &Architecture::default())
}

pub fn build_dnn_with(input_dim: usize, arch: &Architecture) -> Result<NetworkSpec> {
    if input_dim < 1 {
        return Err(Error::Config("dnn needs input_dim >= 1".into()));
    }
    let mut layers: Vec<LayerSpec> = arch.dnn_hidden.iter().map(|&u| LayerSpec::dense(u, Activation::Relu)).collect();
    layers.push(LayerSpec::dense(1, Activation::Sigmoid));
    checked(NetworkSpec::new(vec![input_dim], layers))
}

/// Features as a one-channel sequence: Conv1D(32, 3, relu) -> BatchNorm ->
/// MaxPool1D(2) -> Dropout(0.2) -> Flatten -> Dense(32, relu) -> Dense(1, sigmoid).
pub fn build_cnn(input_dim: usize) -> Result<NetworkSpec> {
    build_cnn_with(input_dim, &Architecture::default())
}

pub fn build_cnn_with(input_dim: usize, arch: &Architecture) -> Result<NetworkSpec> {
    let needed = arch.cnn_kernel + arch.cnn_pool - 1;
    if input_dim < needed.max(1) {
        return Err(Error::Config(format!(
            "cnn needs at least {needed} features for kernel {} and pool {}, got {input_dim}",
            arch.cnn_kernel, arch.cnn_pool
        )));
    }
    checked(NetworkSpec::new(
        vec![input_dim, 1],
        vec![
            LayerSpec::Conv1D { filters: arch.cnn_filters, kernel_size: arch.cnn_kernel, activation: Activation::Relu },
            LayerSpec::batch_norm(),
            LayerSpec::MaxPool1D { pool_size: arch.cnn_pool },
            LayerSpec::Dropout { rate: arch.dropout },
            LayerSpec::Flatten,
            LayerSpec::dense(arch.cnn_dense, Activation::Relu),
            LayerSpec::dense(1, Activation::Sigmoid),
        ],
    ))
}

/// Features as a univariate sequence of `input_dim` steps: LSTM(32) ->
/// Dropout(0.2) -> Dense(1, sigmoid).
pub fn build_lstm(input_dim: usize) -> Result<NetworkSpec> {
    build_lstm_with(input_dim, &Architecture::default())
}

pub fn build_lstm_with(input_dim: usize, arch: &Architecture) -> Result<NetworkSpec> {
    if input_dim < 1 {
        return Err(Error::Config("lstm needs a sequence of at least one step".into()));
    }
    checked(NetworkSpec::new(
        vec![input_dim, 1],
        vec![
            LayerSpec::Lstm { units: arch.lstm_units },
            LayerSpec::Dropout { rate: arch.dropout },
            LayerSpec::dense(1, Activation::Sigmoid),
        ],
    ))
}

/// Dense(ceil(n/2), relu) -> Dense(ceil(n/4), relu) -> Dense(ceil(n/2), relu)
/// -> Dense(n, sigmoid).
pub fn build_autoencoder(input_dim: usize) -> Result<NetworkSpec> {
    if input_dim < 2 {
        return Err(Error::Config("autoencoder needs input_dim >= 2".into()));
    }
    let half = input_dim.div_ceil(2);
    let bottleneck = input_dim.div_ceil(4);
    checked(NetworkSpec::new(
        vec![input_dim],
        vec![
            LayerSpec::dense(half, Activation::Relu),
            LayerSpec::dense(bottleneck, Activation::Relu),
            LayerSpec::dense(half, Activation::Relu),
            LayerSpec::dense(input_dim, Activation::Sigmoid),
        ],
    ))
}

fn checked(spec: NetworkSpec) -> Result<NetworkSpec> {
    spec.shapes().map_err(|e| Error::Config(e.to_string()))?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dnn_structure() {
        let s = build_dnn(21).unwrap();
        assert_eq!(s.layer_widths().unwrap(), vec![64, 32, 1]);
        assert_eq!(s.count_parameters().unwrap(), (21 * 64 + 64) + (64 * 32 + 32) + (32 + 1));
        assert_eq!(s.count_parameters().unwrap(), 3521);
        assert!(matches!(build_dnn(0), Err(Error::Config(_))));
    }

    #[test]
    fn cnn_structure() {
        let s = build_cnn(21).unwrap();
        let shapes = s.shapes().unwrap();
        assert_eq!(shapes[1], vec![19, 32]);
        assert_eq!(shapes[3], vec![9, 32]);
        assert_eq!(shapes[5], vec![288]);
        assert_eq!(shapes.last().unwrap(), &vec![1]);
        // conv 3*1*32+32, bn 2*32, dense 288*32+32, out 32+1
        assert_eq!(s.count_parameters().unwrap(), 128 + 64 + 9248 + 33);
        assert!(matches!(build_cnn(2), Err(Error::Config(_))));
        assert!(build_cnn(4).is_ok());
        assert!(matches!(build_cnn(3), Err(Error::Config(_))));
    }

    #[test]
    fn lstm_structure() {
        let s = build_lstm(21).unwrap();
        assert_eq!(s.input_shape, vec![21, 1]);
        assert_eq!(s.layers[0], LayerSpec::Lstm { units: 32 });
        assert_eq!(s.count_parameters().unwrap(), 4 * (32 * (1 + 32) + 32) + 33);
        assert!(matches!(build_lstm(0), Err(Error::Config(_))));
    }

    #[test]
    fn autoencoder_structure() {
        assert_eq!(build_autoencoder(88).unwrap().layer_widths().unwrap(), vec![44, 22, 44, 88]);
        let s = build_autoencoder(21).unwrap();
        assert_eq!(s.layer_widths().unwrap(), vec![11, 6, 11, 21]);
        assert_eq!(build_autoencoder(2).unwrap().layer_widths().unwrap(), vec![1, 1, 1, 2]);
        assert!(matches!(build_autoencoder(1), Err(Error::Config(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = ModelConfig::new(Family::Dnn, 4);
        assert!(c.validate().is_ok());
        c.epochs = 0;
        assert!(c.validate().is_err());
        c.epochs = 1;
        c.validation_fraction = 1.0;
        assert!(c.validate().is_err());
        c.validation_fraction = 0.1;
        c.batch_size = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn family_names() {
        for f in Family::ALL {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
        }
        assert!("gan".parse::<Family>().is_err());
    }
}
