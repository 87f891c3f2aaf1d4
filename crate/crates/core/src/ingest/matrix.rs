use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowLabel;

/// Dense row-major feature table, optionally labeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    n_rows: usize,
    feature_names: Vec<String>,
    labels: Option<Vec<FlowLabel>>,
}

impl FeatureMatrix {
    pub fn new(values: Vec<f64>, feature_names: Vec<String>, labels: Option<Vec<FlowLabel>>) -> Result<Self> {
        let n_cols = feature_names.len();
        if n_cols == 0 {
            return Err(Error::Shape("a feature matrix needs at least one feature".into()));
        }
        if !values.len().is_multiple_of(n_cols) {
            return Err(Error::Shape(format!("{} values do not fill rows of {n_cols} features", values.len())));
        }
        let n_rows = values.len() / n_cols;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite value at row {}, feature '{}'",
                pos / n_cols,
                feature_names[pos % n_cols]
            )));
        }
        if let Some(l) = &labels {
            if l.len() != n_rows {
                return Err(Error::Shape(format!("{} labels for {n_rows} rows", l.len())));
            }
        }
        Ok(FeatureMatrix { values, n_rows, feature_names, labels })
    }

    /// Builds a matrix from row vectors with generated names `f0, f1, ...`.
    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<FlowLabel>>) -> Result<Self> {
        let n_cols = rows.first().map(Vec::len).ok_or_else(|| Error::Empty("no rows".into()))?;
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let names = (0..n_cols).map(|i| format!("f{i}")).collect();
        FeatureMatrix::new(rows.concat(), names, labels)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> Option<&[FlowLabel]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[FlowLabel]> {
        self.labels().ok_or_else(|| Error::Schema("dataset has no class column".into()))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_features();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_features())
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    /// Copies the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let n = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            values,
            n_rows: indices.len(),
            feature_names: self.feature_names.clone(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    pub fn without_labels(&self) -> FeatureMatrix {
        FeatureMatrix { labels: None, ..self.clone() }
    }

    pub fn with_labels(mut self, labels: Vec<FlowLabel>) -> Result<Self> {
        if labels.len() != self.n_rows {
            return Err(Error::Shape(format!("{} labels for {} rows", labels.len(), self.n_rows)));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Replaces the values, keeping names and labels. Used by normalizers.
    pub(crate) fn map_values(&self, values: Vec<f64>) -> FeatureMatrix {
        debug_assert_eq!(values.len(), self.values.len());
        FeatureMatrix { values, ..self.clone() }
    }

    /// Row count per class: (mice, elephants).
    pub fn class_counts(&self) -> Option<(usize, usize)> {
        self.labels().map(|l| {
            let e = l.iter().filter(|x| x.is_elephant()).count();
            (l.len() - e, e)
        })
    }
}
