use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::matrix::FeatureMatrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMethod {
    #[default]
    MinMax,
    ZScore,
}

/// Per-feature statistics of the rows a normalizer was fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub method: NormalizationMethod,
    pub features: Vec<FeatureStats>,
}

impl NormalizationParams {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    fn center_spread(&self, j: usize) -> (f64, f64) {
        let s = &self.features[j];
        match self.method {
            NormalizationMethod::MinMax => (s.min, s.max - s.min),
            NormalizationMethod::ZScore => (s.mean, s.std),
        }
    }

    /// True when feature `j` has zero spread and maps to 0.
    pub fn is_degenerate(&self, j: usize) -> bool {
        self.center_spread(j).1 == 0.0
    }

    fn check(&self, m: &FeatureMatrix) -> Result<()> {
        if m.n_features() != self.len() {
            return Err(Error::Shape(format!(
                "matrix has {} features, normalizer was fitted on {}",
                m.n_features(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Applies the fitted transform. Values outside the fitted range are
    /// not clamped.
    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check(m)?;
        let n = self.len();
        let cs: Vec<_> = (0..n).map(|j| self.center_spread(j)).collect();
        let values = m
            .values()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let (c, s) = cs[i % n];
                if s == 0.0 {
                    0.0
                } else {
                    (x - c) / s
                }
            })
            .collect();
        Ok(m.map_values(values))
    }

    /// Inverse of [`apply`](Self::apply); degenerate features map back to their center.
    pub fn invert(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check(m)?;
        let n = self.len();
        let values = m
            .values()
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let (c, s) = self.center_spread(i % n);
                y * s + c
            })
            .collect();
        Ok(m.map_values(values))
    }
}

/// Fits per-feature statistics over the rows of `train` only.
pub fn fit_normalizer(train: &FeatureMatrix, method: NormalizationMethod) -> Result<NormalizationParams> {
    if train.is_empty() {
        return Err(Error::Empty("cannot fit a normalizer on zero rows".into()));
    }
    let n = train.n_rows() as f64;
    let features = (0..train.n_features())
        .map(|j| {
            let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            for x in train.column(j) {
                min = min.min(x);
                max = max.max(x);
                sum += x;
            }
            let mean = sum / n;
            let var = train.column(j).map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            FeatureStats { min, max, mean, std: var.sqrt() }
        })
        .collect();
    Ok(NormalizationParams { method, features })
}

pub fn apply_normalizer(m: &FeatureMatrix, p: &NormalizationParams) -> Result<FeatureMatrix> {
    p.apply(m)
}
