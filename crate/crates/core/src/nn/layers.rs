//! Layer descriptions, shape algebra, and the forward/backward kernels.
//!
//! Activations flow as `[batch, ...sample]` tensors. Sequence layers
//! (conv, pooling, LSTM) take `[batch, steps, channels]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::{gemm, Tensor, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

/// `tanh` through a single `exp`; absolute error stays near 1e-16.
#[inline]
pub(crate) fn tanh(z: f64) -> f64 {
    let t = (-2.0 * z.abs()).exp();
    ((1.0 - t) / (1.0 + t)).copysign(z)
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }

    fn apply_in_place(self, v: &mut [f64]) {
        if self != Activation::Linear {
            v.iter_mut().for_each(|x| *x = self.apply(*x));
        }
    }

    /// Turns `grad` (w.r.t. outputs `a`) into the gradient w.r.t. pre-activations.
    fn backprop_in_place(self, a: &[f64], grad: &mut [f64]) {
        if self != Activation::Linear {
            grad.iter_mut().zip(a).for_each(|(g, &a)| *g *= self.derivative(a));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// `y = act(x W + b)` over the last axis of a `[batch, features]` input.
    Dense {
        units: usize,
        activation: Activation,
    },
    /// Valid (unpadded) stride-1 convolution over `[batch, steps, channels]`.
    Conv1D {
        filters: usize,
        kernel_size: usize,
        activation: Activation,
    },
    /// Non-overlapping max pooling; a trailing partial window is dropped.
    MaxPool1D {
        pool_size: usize,
    },
    /// Standardizes the last axis. `momentum` weights the old running value.
    BatchNorm {
        momentum: f64,
        epsilon: f64,
    },
    /// Inverted dropout: survivors are scaled by `1 / (1 - rate)`.
    Dropout {
        rate: f64,
    },
    /// Runs over `[batch, steps, features]` and emits the final hidden state.
    Lstm {
        units: usize,
    },
    Flatten,
}

impl LayerSpec {
    pub fn dense(units: usize, activation: Activation) -> Self {
        LayerSpec::Dense { units, activation }
    }

    pub fn batch_norm() -> Self {
        LayerSpec::BatchNorm { momentum: 0.99, epsilon: 1e-3 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv1D { .. } => "conv1d",
            LayerSpec::MaxPool1D { .. } => "maxpool1d",
            LayerSpec::BatchNorm { .. } => "batchnorm",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::Flatten => "flatten",
        }
    }

    /// Output sample shape for the given input sample shape.
    pub fn output_shape(&self, layer: usize, input: &[usize]) -> Result<Vec<usize>> {
        let dim = |message: String| Error::Dimension { layer, message };
        let positive = |v: usize, what: &str| {
            if v == 0 {
                Err(dim(format!("{what} must be >= 1")))
            } else {
                Ok(())
            }
        };
        let sequence = || match input {
            [steps, channels] => Ok((*steps, *channels)),
            _ => Err(dim(format!("{} expects [steps, channels] samples, got {input:?}", self.name()))),
        };
        match *self {
            LayerSpec::Dense { units, .. } => {
                positive(units, "units")?;
                match input {
                    [_] => Ok(vec![units]),
                    _ => Err(dim(format!("dense expects flat samples, got {input:?}"))),
                }
            }
            LayerSpec::Conv1D { filters, kernel_size, .. } => {
                positive(filters, "filters")?;
                positive(kernel_size, "kernel_size")?;
                let (steps, _) = sequence()?;
                if steps < kernel_size {
                    return Err(dim(format!("sequence of {steps} steps is shorter than kernel {kernel_size}")));
                }
                Ok(vec![steps - kernel_size + 1, filters])
            }
            LayerSpec::MaxPool1D { pool_size } => {
                positive(pool_size, "pool_size")?;
                let (steps, channels) = sequence()?;
                if steps < pool_size {
                    return Err(dim(format!("sequence of {steps} steps is shorter than pool {pool_size}")));
                }
                Ok(vec![steps / pool_size, channels])
            }
            LayerSpec::BatchNorm { momentum, epsilon } => {
                if !(0.0..=1.0).contains(&momentum) || epsilon.is_nan() || epsilon <= 0.0 {
                    return Err(dim("batchnorm needs momentum in [0, 1] and epsilon > 0".into()));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(dim(format!("dropout rate {rate} outside [0, 1)")));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Lstm { units } => {
                positive(units, "units")?;
                sequence()?;
                Ok(vec![units])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        }
    }

    /// Shapes of the trainable parameter arrays, in storage order.
    pub fn param_shapes(&self, input: &[usize]) -> Vec<Vec<usize>> {
        let last = input.last().copied().unwrap_or(0);
        match *self {
            LayerSpec::Dense { units, .. } => vec![vec![last, units], vec![units]],
            LayerSpec::Conv1D { filters, kernel_size, .. } => {
                vec![vec![kernel_size, last, filters], vec![filters]]
            }
            LayerSpec::BatchNorm { .. } => vec![vec![last], vec![last]],
            LayerSpec::Lstm { units } => vec![vec![last, 4 * units], vec![units, 4 * units], vec![4 * units]],
            LayerSpec::MaxPool1D { .. } | LayerSpec::Dropout { .. } | LayerSpec::Flatten => vec![],
        }
    }
}

/// Running statistics kept by batch normalization for inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Intermediates recorded by a train-mode forward pass.
#[derive(Debug, Clone)]
pub(crate) enum LayerCache {
    Dense { input: Tensor, output: Tensor },
    Conv1D { input: Tensor, output: Tensor },
    MaxPool { in_shape: Vec<usize>, argmax: Vec<usize> },
    BatchNorm { xhat: Vec<f64>, inv_std: Vec<f64> },
    Dropout { mask: Vec<f64> },
    Lstm(Box<LstmCache>),
    Flatten { in_shape: Vec<usize> },
}

#[derive(Debug, Clone)]
pub(crate) struct LstmCache {
    input: Tensor,
    /// Post-activation gates `[i | f | g | o]` per step: `steps x batch x 4u`.
    gates: Vec<f64>,
    /// Cell states per step: `steps x batch x u`.
    cells: Vec<f64>,
    /// `tanh` of the cell states.
    cell_tanh: Vec<f64>,
    /// Hidden states per step: `steps x batch x u`.
    hidden: Vec<f64>,
}

pub(crate) fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor, act: Activation) -> Tensor {
    let (batch, n_in) = (x.shape()[0], x.shape()[1]);
    let units = w.shape()[1];
    let mut y = Vec::with_capacity(batch * units);
    for _ in 0..batch {
        y.extend_from_slice(b.data());
    }
    gemm(batch, n_in, units, View::new(x.data(), n_in), View::new(w.data(), units), 1.0, &mut y);
    act.apply_in_place(&mut y);
    Tensor::from_parts(vec![batch, units], y)
}

/// Returns (dx, [dW, db]).
pub(crate) fn dense_backward(
    input: &Tensor,
    output: &Tensor,
    w: &Tensor,
    act: Activation,
    grad: &Tensor,
) -> (Tensor, Vec<Tensor>) {
    let (batch, n_in) = (input.shape()[0], input.shape()[1]);
    let units = w.shape()[1];
    let mut dz = grad.data().to_vec();
    act.backprop_in_place(output.data(), &mut dz);

    let mut dw = vec![0.0; n_in * units];
    gemm(n_in, batch, units, View::t(input.data(), n_in), View::new(&dz, units), 0.0, &mut dw);
    let mut db = vec![0.0; units];
    for row in dz.chunks_exact(units) {
        db.iter_mut().zip(row).for_each(|(d, g)| *d += g);
    }
    let mut dx = vec![0.0; batch * n_in];
    gemm(batch, units, n_in, View::new(&dz, units), View::t(w.data(), units), 0.0, &mut dx);
    (
        Tensor::from_parts(input.shape().to_vec(), dx),
        vec![Tensor::from_parts(vec![n_in, units], dw), Tensor::from_parts(vec![units], db)],
    )
}

pub(crate) fn conv1d_forward(x: &Tensor, w: &Tensor, b: &Tensor, act: Activation) -> Tensor {
    let (batch, steps, channels) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (kernel, filters) = (w.shape()[0], w.shape()[2]);
    let out_steps = steps - kernel + 1;
    let mut y = Vec::with_capacity(batch * out_steps * filters);
    for _ in 0..batch * out_steps {
        y.extend_from_slice(b.data());
    }
    for n in 0..batch {
        let xs = &x.data()[n * steps * channels..(n + 1) * steps * channels];
        let ys = &mut y[n * out_steps * filters..(n + 1) * out_steps * filters];
        // Each output step reads a contiguous window of kernel*channels inputs;
        // consecutive windows overlap with a row stride of `channels`.
        gemm(
            out_steps,
            kernel * channels,
            filters,
            View::strided(xs, channels, 1),
            View::new(w.data(), filters),
            1.0,
            ys,
        );
    }
    act.apply_in_place(&mut y);
    Tensor::from_parts(vec![batch, out_steps, filters], y)
}

pub(crate) fn conv1d_backward(
    input: &Tensor,
    output: &Tensor,
    w: &Tensor,
    act: Activation,
    grad: &Tensor,
) -> (Tensor, Vec<Tensor>) {
    let (batch, steps, channels) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (kernel, filters) = (w.shape()[0], w.shape()[2]);
    let out_steps = steps - kernel + 1;
    let window = kernel * channels;
    let mut dz = grad.data().to_vec();
    act.backprop_in_place(output.data(), &mut dz);

    let mut dw = vec![0.0; window * filters];
    let mut db = vec![0.0; filters];
    let mut dx = vec![0.0; input.len()];
    let mut dpatch = vec![0.0; out_steps * window];
    for n in 0..batch {
        let xs = &input.data()[n * steps * channels..(n + 1) * steps * channels];
        let dzs = &dz[n * out_steps * filters..(n + 1) * out_steps * filters];
        gemm(window, out_steps, filters, View::strided(xs, 1, channels), View::new(dzs, filters), 1.0, &mut dw);
        for row in dzs.chunks_exact(filters) {
            db.iter_mut().zip(row).for_each(|(d, g)| *d += g);
        }
        gemm(out_steps, filters, window, View::new(dzs, filters), View::t(w.data(), filters), 0.0, &mut dpatch);
        let dxs = &mut dx[n * steps * channels..(n + 1) * steps * channels];
        for (t, patch) in dpatch.chunks_exact(window).enumerate() {
            dxs[t * channels..t * channels + window].iter_mut().zip(patch).for_each(|(d, g)| *d += g);
        }
    }
    (
        Tensor::from_parts(input.shape().to_vec(), dx),
        vec![Tensor::from_parts(w.shape().to_vec(), dw), Tensor::from_parts(vec![filters], db)],
    )
}

/// Returns the pooled tensor and, per output element, the flat input index
/// of the first maximal element of its window.
pub(crate) fn maxpool_forward(x: &Tensor, pool: usize) -> (Tensor, Vec<usize>) {
    let (batch, steps, channels) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let out_steps = steps / pool;
    let mut y = Vec::with_capacity(batch * out_steps * channels);
    let mut argmax = Vec::with_capacity(y.capacity());
    let data = x.data();
    for n in 0..batch {
        for t in 0..out_steps {
            for c in 0..channels {
                let mut best = (n * steps + t * pool) * channels + c;
                for j in 1..pool {
                    let idx = (n * steps + t * pool + j) * channels + c;
                    if data[idx] > data[best] {
                        best = idx;
                    }
                }
                y.push(data[best]);
                argmax.push(best);
            }
        }
    }
    (Tensor::from_parts(vec![batch, out_steps, channels], y), argmax)
}

pub(crate) fn maxpool_backward(in_shape: &[usize], argmax: &[usize], grad: &Tensor) -> Tensor {
    let mut dx = vec![0.0; in_shape.iter().product()];
    for (&i, &g) in argmax.iter().zip(grad.data()) {
        dx[i] += g;
    }
    Tensor::from_parts(in_shape.to_vec(), dx)
}

/// Train-mode batch normalization over the last axis. Returns output,
/// normalized values, per-channel inverse std, and the batch mean/var.
pub(crate) fn batchnorm_train(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    epsilon: f64,
) -> (Tensor, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let channels = gamma.len();
    let count = (x.len() / channels) as f64;
    let mut mean = vec![0.0; channels];
    for row in x.data().chunks_exact(channels) {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; channels];
    for row in x.data().chunks_exact(channels) {
        for c in 0..channels {
            let d = row[c] - mean[c];
            var[c] += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= count);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + epsilon).sqrt()).collect();

    let mut xhat = Vec::with_capacity(x.len());
    let mut y = Vec::with_capacity(x.len());
    for row in x.data().chunks_exact(channels) {
        for c in 0..channels {
            let h = (row[c] - mean[c]) * inv_std[c];
            xhat.push(h);
            y.push(gamma.data()[c] * h + beta.data()[c]);
        }
    }
    (Tensor::from_parts(x.shape().to_vec(), y), xhat, inv_std, mean, var)
}

pub(crate) fn batchnorm_infer(x: &Tensor, gamma: &Tensor, beta: &Tensor, stats: &RunningStats, epsilon: f64) -> Tensor {
    let channels = gamma.len();
    let scale: Vec<f64> = (0..channels).map(|c| gamma.data()[c] / (stats.var[c] + epsilon).sqrt()).collect();
    let mut y = x.data().to_vec();
    for row in y.chunks_exact_mut(channels) {
        for c in 0..channels {
            row[c] = (row[c] - stats.mean[c]) * scale[c] + beta.data()[c];
        }
    }
    Tensor::from_parts(x.shape().to_vec(), y)
}

pub(crate) fn batchnorm_backward(
    xhat: &[f64],
    inv_std: &[f64],
    gamma: &Tensor,
    grad: &Tensor,
) -> (Tensor, Vec<Tensor>) {
    let channels = gamma.len();
    let count = (grad.len() / channels) as f64;
    let mut dgamma = vec![0.0; channels];
    let mut dbeta = vec![0.0; channels];
    for (g, h) in grad.data().chunks_exact(channels).zip(xhat.chunks_exact(channels)) {
        for c in 0..channels {
            dgamma[c] += g[c] * h[c];
            dbeta[c] += g[c];
        }
    }
    // dx = gamma * inv_std / N * (N * dy - sum(dy) - xhat * sum(dy * xhat))
    let mut dx = Vec::with_capacity(grad.len());
    for (g, h) in grad.data().chunks_exact(channels).zip(xhat.chunks_exact(channels)) {
        for c in 0..channels {
            let k = gamma.data()[c] * inv_std[c] / count;
            dx.push(k * (count * g[c] - dbeta[c] - h[c] * dgamma[c]));
        }
    }
    (
        Tensor::from_parts(grad.shape().to_vec(), dx),
        vec![Tensor::from_parts(vec![channels], dgamma), Tensor::from_parts(vec![channels], dbeta)],
    )
}

/// Samples an inverted-dropout mask: each entry is 0 with probability
/// `rate`, otherwise `1 / (1 - rate)`.
pub(crate) fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    (0..len).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { scale }).collect()
}

pub(crate) fn apply_mask(x: &Tensor, mask: &[f64]) -> Tensor {
    let y = x.data().iter().zip(mask).map(|(v, m)| v * m).collect();
    Tensor::from_parts(x.shape().to_vec(), y)
}

/// Runs the LSTM and returns the final hidden state (and the cache when
/// `keep` is set). Gate order in the fused weight columns: input, forget,
/// cell candidate, output.
pub(crate) fn lstm_forward(x: &Tensor, w: &Tensor, u: &Tensor, b: &Tensor, keep: bool) -> (Tensor, Option<LstmCache>) {
    let (batch, steps, features) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let units = u.shape()[0];
    let g4 = 4 * units;
    let mut gates = vec![0.0; if keep { steps * batch * g4 } else { batch * g4 }];
    let mut cells = vec![0.0; if keep { steps * batch * units } else { 2 * batch * units }];
    let mut hidden = vec![0.0; if keep { steps * batch * units } else { 2 * batch * units }];
    let mut cell_tanh = vec![0.0; if keep { steps * batch * units } else { 0 }];
    let bu = batch * units;

    for t in 0..steps {
        let (gslot, cur, prev) = if keep {
            (t * batch * g4, t * bu, t.checked_sub(1).map(|p| p * bu))
        } else {
            (0, (t % 2) * bu, (t > 0).then(|| ((t + 1) % 2) * bu))
        };
        let z = &mut gates[gslot..gslot + batch * g4];
        for row in z.chunks_exact_mut(g4) {
            row.copy_from_slice(b.data());
        }
        // x_t rows are `steps * features` apart in the input.
        gemm(
            batch,
            features,
            g4,
            View::strided(&x.data()[t * features..], steps * features, 1),
            View::new(w.data(), g4),
            1.0,
            z,
        );
        if let Some(p) = prev {
            gemm(batch, units, g4, View::new(&hidden[p..p + bu], units), View::new(u.data(), g4), 1.0, z);
        }
        for n in 0..batch {
            let zr = &mut z[n * g4..(n + 1) * g4];
            for k in 0..units {
                let i = sigmoid(zr[k]);
                let f = sigmoid(zr[units + k]);
                let g = tanh(zr[2 * units + k]);
                let o = sigmoid(zr[3 * units + k]);
                zr[k] = i;
                zr[units + k] = f;
                zr[2 * units + k] = g;
                zr[3 * units + k] = o;
                let c_prev = prev.map_or(0.0, |p| cells[p + n * units + k]);
                let c = f * c_prev + i * g;
                let tc = tanh(c);
                cells[cur + n * units + k] = c;
                hidden[cur + n * units + k] = o * tc;
                if keep {
                    cell_tanh[cur + n * units + k] = tc;
                }
            }
        }
    }
    let last = if keep { (steps - 1) * bu } else { ((steps - 1) % 2) * bu };
    let out = Tensor::from_parts(vec![batch, units], hidden[last..last + bu].to_vec());
    let cache = keep.then(|| LstmCache { input: x.clone(), gates, cells, cell_tanh, hidden });
    (out, cache)
}

pub(crate) fn lstm_backward(cache: &LstmCache, w: &Tensor, u: &Tensor, grad: &Tensor) -> (Tensor, Vec<Tensor>) {
    let x = &cache.input;
    let (batch, steps, features) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let units = u.shape()[0];
    let g4 = 4 * units;
    let bu = batch * units;

    let mut dw = vec![0.0; features * g4];
    let mut du = vec![0.0; units * g4];
    let mut db = vec![0.0; g4];
    let mut dx = vec![0.0; x.len()];
    let mut dh = grad.data().to_vec();
    let mut dc = vec![0.0; bu];
    let mut dz = vec![0.0; batch * g4];
    let mut dxt = vec![0.0; batch * features];

    for t in (0..steps).rev() {
        let gates = &cache.gates[t * batch * g4..(t + 1) * batch * g4];
        let cell_tanh = &cache.cell_tanh[t * bu..(t + 1) * bu];
        for n in 0..batch {
            let gr = &gates[n * g4..(n + 1) * g4];
            let dzr = &mut dz[n * g4..(n + 1) * g4];
            for k in 0..units {
                let (i, f, g, o) = (gr[k], gr[units + k], gr[2 * units + k], gr[3 * units + k]);
                let idx = n * units + k;
                let tc = cell_tanh[idx];
                let c_prev = if t > 0 { cache.cells[(t - 1) * bu + idx] } else { 0.0 };
                let dhk = dh[idx];
                let dck = dc[idx] + dhk * o * (1.0 - tc * tc);
                dzr[k] = dck * g * i * (1.0 - i);
                dzr[units + k] = dck * c_prev * f * (1.0 - f);
                dzr[2 * units + k] = dck * i * (1.0 - g * g);
                dzr[3 * units + k] = dhk * tc * o * (1.0 - o);
                dc[idx] = dck * f;
            }
        }
        gemm(
            features,
            batch,
            g4,
            View::strided(&x.data()[t * features..], 1, steps * features),
            View::new(&dz, g4),
            1.0,
            &mut dw,
        );
        if t > 0 {
            let h_prev = &cache.hidden[(t - 1) * bu..t * bu];
            gemm(units, batch, g4, View::t(h_prev, units), View::new(&dz, g4), 1.0, &mut du);
        }
        for row in dz.chunks_exact(g4) {
            db.iter_mut().zip(row).for_each(|(d, g)| *d += g);
        }
        gemm(batch, g4, features, View::new(&dz, g4), View::t(w.data(), g4), 0.0, &mut dxt);
        for n in 0..batch {
            let dst = (n * steps + t) * features;
            dx[dst..dst + features].copy_from_slice(&dxt[n * features..(n + 1) * features]);
        }
        gemm(batch, g4, units, View::new(&dz, g4), View::t(u.data(), g4), 0.0, &mut dh);
    }
    (
        Tensor::from_parts(x.shape().to_vec(), dx),
        vec![
            Tensor::from_parts(vec![features, g4], dw),
            Tensor::from_parts(vec![units, g4], du),
            Tensor::from_parts(vec![g4], db),
        ],
    )
}

/// Post-activation gates of the most recent step, for inspection.
#[cfg(test)]
pub(crate) fn lstm_cache_gates(cache: &LstmCache) -> &[f64] {
    &cache.gates
}

#[cfg(test)]
mod kernel_tests {
    use super::*;

    #[test]
    fn fast_tanh_matches_libm() {
        let mut worst: f64 = 0.0;
        for i in -40_000..=40_000 {
            let z = i as f64 * 5e-4;
            worst = worst.max((tanh(z) - z.tanh()).abs());
        }
        assert!(worst < 4e-16, "{worst}");
        assert_eq!(tanh(0.0), 0.0);
        assert_eq!(tanh(1e300), 1.0);
        assert_eq!(tanh(-1e300), -1.0);
        assert!(tanh(f64::NAN).is_nan());
    }
}
