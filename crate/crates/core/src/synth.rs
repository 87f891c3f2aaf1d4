//! Seeded, linearly separable elephant/mouse fixture.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowLabel;
use crate::ingest::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureConfig {
    pub rows: usize,
    pub features: usize,
    /// Share of elephant rows; the count is `round(rows * share)`.
    pub elephant_share: f64,
    pub seed: u64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig { rows: 5000, features: 20, elephant_share: 0.1, seed: crate::DEFAULT_SEED }
    }
}

impl FixtureConfig {
    /// Number of features that carry the class signal.
    pub fn informative(&self) -> usize {
        (self.features * 2).div_ceil(5).clamp(1, 8)
    }

    /// Indices of the informative features, evenly spaced over the vector.
    pub fn informative_columns(&self) -> Vec<usize> {
        let k = self.informative().min(self.features);
        (0..k).map(|i| (2 * i + 1) * self.features / (2 * k)).collect()
    }
}

/// Mice draw every feature from U(0, 1). Elephants draw the
/// [`FixtureConfig::informative_columns`] from U(1.5, 3) and the rest from
/// U(0, 1), so a margin of 0.5 separates the classes on each informative axis.
pub fn separable_fixture(cfg: &FixtureConfig) -> Result<FeatureMatrix> {
    if cfg.rows < 2 || cfg.features == 0 {
        return Err(Error::Config("fixture needs at least 2 rows and 1 feature".into()));
    }
    if !(cfg.elephant_share > 0.0 && cfg.elephant_share < 1.0) {
        return Err(Error::Config("elephant_share must lie in (0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let elephants = ((cfg.rows as f64 * cfg.elephant_share).round() as usize).clamp(1, cfg.rows - 1);
    let mut labels: Vec<FlowLabel> = (0..cfg.rows).map(|i| FlowLabel::from(i < elephants)).collect();
    labels.shuffle(&mut rng);
    let mut informative = vec![false; cfg.features];
    for j in cfg.informative_columns() {
        informative[j] = true;
    }
    let mut values = Vec::with_capacity(cfg.rows * cfg.features);
    for label in &labels {
        for &inf in &informative {
            let v = if label.is_elephant() && inf { rng.gen_range(1.5..3.0) } else { rng.gen_range(0.0..1.0) };
            values.push(v);
        }
    }
    let names = (0..cfg.features).map(|j| format!("f{j}")).collect();
    FeatureMatrix::new(values, names, Some(labels))
}

/// Writes `m` as a CSV with its feature names and, when labeled, a trailing
/// `class` column of 0/1.
pub fn write_csv<W: Write>(m: &FeatureMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = m.feature_names().iter().map(String::as_str).collect();
    if m.labels().is_some() {
        header.push("class");
    }
    w.write_record(&header)?;
    for i in 0..m.n_rows() {
        let mut rec: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        if let Some(l) = m.labels() {
            rec.push((l[i] as u8).to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_matrix, BadRowPolicy, DatasetSchema};

    #[test]
    fn default_shape_and_balance() {
        let m = separable_fixture(&FixtureConfig::default()).unwrap();
        assert_eq!((m.n_rows(), m.n_features()), (5000, 20));
        assert_eq!(m.class_counts(), Some((4500, 500)));
        assert_eq!(FixtureConfig::default().informative_columns(), vec![1, 3, 6, 8, 11, 13, 16, 18]);
        let one = FixtureConfig { features: 1, ..Default::default() };
        assert_eq!(one.informative_columns(), vec![0]);
    }

    #[test]
    fn classes_are_separable() {
        let cfg = FixtureConfig { rows: 1000, ..Default::default() };
        let m = separable_fixture(&cfg).unwrap();
        let cols = cfg.informative_columns();
        for (i, l) in m.labels().unwrap().iter().enumerate() {
            let signal_min = cols.iter().map(|&j| m.row(i)[j]).fold(f64::INFINITY, f64::min);
            assert_eq!(l.is_elephant(), signal_min >= 1.5);
            let noise_max = (0..20).filter(|j| !cols.contains(j)).map(|j| m.row(i)[j]).fold(0.0, f64::max);
            assert!(noise_max < 1.0);
        }
    }

    #[test]
    fn seeded() {
        let cfg = FixtureConfig { rows: 100, ..Default::default() };
        assert_eq!(separable_fixture(&cfg).unwrap(), separable_fixture(&cfg).unwrap());
        let other = FixtureConfig { seed: 1, ..cfg.clone() };
        assert_ne!(separable_fixture(&cfg).unwrap(), separable_fixture(&other).unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let m = separable_fixture(&FixtureConfig { rows: 30, features: 3, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        write_csv(&m, &mut buf).unwrap();
        let header = String::from_utf8(buf.clone()).unwrap();
        let cols: Vec<&str> = header.lines().next().unwrap().split(',').collect();
        let schema = DatasetSchema::infer(&cols).unwrap();
        let back = load_matrix(&buf, &schema, BadRowPolicy::FailFast).unwrap();
        assert_eq!(back, m);
    }
}
