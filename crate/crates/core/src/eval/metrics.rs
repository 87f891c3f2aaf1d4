use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowLabel;

/// Binary confusion counts with Elephant as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        ConfusionMatrix { tp, tn, fp, fn_ }
    }

    /// Tallies `predicted` against `actual`; the slices must be equally long.
    pub fn from_labels(actual: &[FlowLabel], predicted: &[FlowLabel]) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(Error::Shape(format!("{} labels vs {} predictions", actual.len(), predicted.len())));
        }
        let mut cm = ConfusionMatrix::default();
        for (&a, &p) in actual.iter().zip(predicted) {
            cm.record(a, p);
        }
        Ok(cm)
    }

    pub fn record(&mut self, actual: FlowLabel, predicted: FlowLabel) {
        match (actual, predicted) {
            (FlowLabel::Elephant, FlowLabel::Elephant) => self.tp += 1,
            (FlowLabel::Mouse, FlowLabel::Mouse) => self.tn += 1,
            (FlowLabel::Mouse, FlowLabel::Elephant) => self.fp += 1,
            (FlowLabel::Elephant, FlowLabel::Mouse) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// (TP + TN) / total.
    pub fn accuracy(&self) -> Result<f64> {
        accuracy(self)
    }

    /// 1 - accuracy.
    pub fn error_rate(&self) -> Result<f64> {
        Ok(1.0 - self.accuracy()?)
    }

    /// Share of all evaluated rows that are false positives.
    pub fn false_positive_share(&self) -> Result<f64> {
        self.ratio(self.fp, self.total())
    }

    pub fn precision(&self) -> Result<f64> {
        self.ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Result<f64> {
        self.ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> Result<f64> {
        self.ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    fn ratio(&self, num: u64, den: u64) -> Result<f64> {
        if den == 0 {
            return Err(Error::Empty("ratio over zero rows".into()));
        }
        Ok(num as f64 / den as f64)
    }
}

impl Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(self, o: ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix::new(self.tp + o.tp, self.tn + o.tn, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, o: ConfusionMatrix) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ConfusionMatrix {
    fn sum<I: Iterator<Item = ConfusionMatrix>>(iter: I) -> Self {
        iter.fold(ConfusionMatrix::default(), Add::add)
    }
}

/// (TP + TN) / (TP + TN + FP + FN); an all-zero matrix is an error.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Empty("accuracy of an empty confusion matrix".into()));
    }
    Ok((cm.tp + cm.tn) as f64 / total as f64)
}

/// Arithmetic mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
