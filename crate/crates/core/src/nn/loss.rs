use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// Probabilities are clamped into `[PROB_EPS, 1 - PROB_EPS]` before the log.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// Mean binary cross-entropy on probabilities.
    Bce,
    /// Mean squared logarithmic error: mean of `(ln(1+p) - ln(1+t))^2`.
    Msle,
    /// Mean squared error.
    Mse,
}

impl Loss {
    /// Mean loss over all elements and its gradient w.r.t. `pred`.
    pub fn evaluate(self, pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
        if pred.shape() != target.shape() {
            return Err(Error::Shape(format!("prediction {:?} vs target {:?}", pred.shape(), target.shape())));
        }
        let n = pred.len() as f64;
        let mut total = 0.0;
        let mut grad = Vec::with_capacity(pred.len());
        for (&p, &t) in pred.data().iter().zip(target.data()) {
            let (l, g) = match self {
                Loss::Bce => bce_term(p, t),
                Loss::Msle => msle_term(p, t)?,
                Loss::Mse => ((p - t) * (p - t), 2.0 * (p - t)),
            };
            total += l;
            grad.push(g / n);
        }
        Ok((total / n, Tensor::from_parts(pred.shape().to_vec(), grad)))
    }

    pub fn value(self, pred: &Tensor, target: &Tensor) -> Result<f64> {
        self.evaluate(pred, target).map(|(l, _)| l)
    }
}

fn bce_term(p: f64, t: f64) -> (f64, f64) {
    let pc = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    let loss = -(t * pc.ln() + (1.0 - t) * (1.0 - pc).ln());
    // Evaluated at the clamped probability even when clamping is active, so
    // a saturated sigmoid still receives a corrective gradient.
    let grad = (pc - t) / (pc * (1.0 - pc));
    (loss, grad)
}

fn msle_term(p: f64, t: f64) -> Result<(f64, f64)> {
    if !(p > -1.0 && t > -1.0) {
        return Err(Error::Numeric(format!("msle needs values > -1, got prediction {p}, target {t}")));
    }
    let d = p.ln_1p() - t.ln_1p();
    Ok((d * d, 2.0 * d / (1.0 + p)))
}

/// Mean squared logarithmic error of a single row.
pub fn per_sample_msle(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Shape(format!("rows of length {} and {}", pred.len(), target.len())));
    }
    let mut total = 0.0;
    for (&p, &t) in pred.iter().zip(target) {
        total += msle_term(p, t)?.0;
    }
    Ok(total / pred.len() as f64)
}
