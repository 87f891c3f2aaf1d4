//! Versioned JSON model files. Everything needed to rebuild the detector is
//! stored; wall-clock timings are not, so equal runs give equal bytes.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, TrainedModel, TrainingHistory};
use crate::error::{Error, Result};
use crate::ingest::NormalizationParams;
use crate::nn::{Network, NetworkSpec, RunningStats, Tensor};

pub const MODEL_FORMAT: &str = "elephant-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub spec: NetworkSpec,
    pub feature_names: Vec<String>,
    pub normalizer: NormalizationParams,
    pub params: Vec<Tensor>,
    pub running_stats: Vec<Option<RunningStats>>,
    pub parameter_count: usize,
    pub threshold: Option<f64>,
    pub manifest_id: Option<String>,
    pub history: TrainingHistory,
}

impl From<&TrainedModel> for ModelFile {
    fn from(m: &TrainedModel) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            config: m.config.clone(),
            spec: m.network.spec().clone(),
            feature_names: m.feature_names.clone(),
            normalizer: m.normalizer.clone(),
            params: m.network.params().to_vec(),
            running_stats: m.network.running_stats().to_vec(),
            parameter_count: m.parameter_count,
            threshold: m.threshold,
            manifest_id: m.manifest_id.clone(),
            history: m.history.clone(),
        }
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<TrainedModel> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Format(format!("not a model file (format '{}')", self.format)));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {}", self.version)));
        }
        if self.spec != self.config.network_spec()? {
            return Err(Error::Format("stored network does not match the stored configuration".into()));
        }
        if self.normalizer.len() != self.config.input_dim || self.feature_names.len() != self.config.input_dim {
            return Err(Error::Format("normalizer or feature names disagree with input_dim".into()));
        }
        let network = Network::from_parts(self.spec, self.params, self.running_stats)?;
        if network.count_parameters() != self.parameter_count {
            return Err(Error::Format("parameter count mismatch".into()));
        }
        Ok(TrainedModel {
            config: self.config,
            network,
            normalizer: self.normalizer,
            feature_names: self.feature_names,
            history: self.history,
            total_seconds: 0.0,
            parameter_count: self.parameter_count,
            threshold: self.threshold,
            manifest_id: self.manifest_id,
        })
    }
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&ModelFile::from(self))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<ModelFile>(text)?.into_model()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut src: R) -> Result<Self> {
        let mut text = String::new();
        src.read_to_string(&mut text)?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{predict, train, Family};
    use crate::synth::{separable_fixture, FixtureConfig};

    #[test]
    fn round_trip_preserves_predictions() {
        let data = separable_fixture(&FixtureConfig { rows: 200, features: 6, elephant_share: 0.2, seed: 9 }).unwrap();
        for family in [Family::Dnn, Family::Cnn, Family::Lstm] {
            let mut cfg = ModelConfig::new(family, 6);
            cfg.epochs = 2;
            let m = train(&cfg, &data).unwrap();
            let text = m.to_json().unwrap();
            let back = TrainedModel::from_json(&text).unwrap();
            assert_eq!(back.to_json().unwrap(), text);
            assert_eq!(predict(&m, &data).unwrap(), predict(&back, &data).unwrap());
        }
    }

    #[test]
    fn rejects_foreign_files() {
        assert!(TrainedModel::from_json("{}").is_err());
        let data = separable_fixture(&FixtureConfig { rows: 50, features: 4, elephant_share: 0.2, seed: 1 }).unwrap();
        let mut cfg = ModelConfig::new(Family::Dnn, 4);
        cfg.epochs = 1;
        let mut file = ModelFile::from(&train(&cfg, &data).unwrap());
        file.version = 99;
        assert!(matches!(file.clone().into_model(), Err(Error::Format(_))));
        file.version = MODEL_VERSION;
        file.params.pop();
        assert!(matches!(file.into_model(), Err(Error::Format(_))));
    }
}
