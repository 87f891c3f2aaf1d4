use std::ops::Range;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::layers::{self, LayerCache, LayerSpec, RunningStats};
use crate::nn::tensor::Tensor;

/// Layer stack plus the per-sample input shape it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Self {
        NetworkSpec { input_shape, layers }
    }

    /// Sample shapes: the input followed by each layer's output.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(Error::Dimension {
                layer: 0,
                message: format!("input shape {:?} must be non-empty and positive", self.input_shape),
            });
        }
        let mut shapes = vec![self.input_shape.clone()];
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer.output_shape(i, shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        Ok(self.shapes()?.pop().unwrap())
    }

    /// Output width of each layer, flattened.
    pub fn layer_widths(&self) -> Result<Vec<usize>> {
        Ok(self.shapes()?[1..].iter().map(|s| s.iter().product()).collect())
    }

    /// Trainable parameter count; batch-norm running statistics are excluded.
    pub fn count_parameters(&self) -> Result<usize> {
        let shapes = self.shapes()?;
        Ok(self
            .layers
            .iter()
            .zip(&shapes)
            .flat_map(|(l, s)| l.param_shapes(s))
            .map(|p| p.iter().product::<usize>())
            .sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// A network with its parameters.
///
/// Train-mode forward passes record intermediates that the following
/// [`backward`](Network::backward) consumes; inference takes `&self` and may
/// run from many threads.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    shapes: Vec<Vec<usize>>,
    params: Vec<Tensor>,
    slots: Vec<Range<usize>>,
    running: Vec<Option<RunningStats>>,
    cache: Option<(usize, Vec<LayerCache>)>,
}

impl Network {
    /// Glorot-uniform weights from a seeded generator; zero biases; batch
    /// norm starts at unit scale, zero shift.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let shapes = spec.shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let mut slots = Vec::new();
        let mut running = Vec::new();
        for (layer, input) in spec.layers.iter().zip(&shapes) {
            let start = params.len();
            let pshapes = layer.param_shapes(input);
            match layer {
                LayerSpec::Dense { .. } | LayerSpec::Conv1D { .. } | LayerSpec::Lstm { .. } => {
                    let out_dim = *pshapes[0].last().unwrap();
                    for shape in &pshapes {
                        let is_bias = shape.len() == 1;
                        if is_bias {
                            params.push(Tensor::zeros(shape));
                            continue;
                        }
                        let (fan_in, fan_out) = match layer {
                            // kernel [k, c, f]: receptive field scales both fans
                            LayerSpec::Conv1D { .. } => (shape[0] * shape[1], shape[0] * shape[2]),
                            LayerSpec::Lstm { .. } => (shape[0], out_dim),
                            _ => (shape[0], shape[1]),
                        };
                        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                        let n: usize = shape.iter().product();
                        let data = (0..n).map(|_| rng.gen_range(-limit..limit)).collect();
                        params.push(Tensor::from_parts(shape.clone(), data));
                    }
                    running.push(None);
                }
                LayerSpec::BatchNorm { .. } => {
                    let c = pshapes[0][0];
                    params.push(Tensor::filled(&[c], 1.0));
                    params.push(Tensor::zeros(&[c]));
                    running.push(Some(RunningStats { mean: vec![0.0; c], var: vec![1.0; c] }));
                }
                _ => running.push(None),
            }
            slots.push(start..params.len());
        }
        Ok(Network { spec, shapes, params, slots, running, cache: None })
    }

    /// Rebuilds a network from stored parameters and running statistics.
    pub fn from_parts(spec: NetworkSpec, params: Vec<Tensor>, running: Vec<Option<RunningStats>>) -> Result<Self> {
        let mut net = Network::new(spec, 0)?;
        if params.len() != net.params.len() {
            return Err(Error::Format(format!("expected {} parameter arrays, got {}", net.params.len(), params.len())));
        }
        for (i, (have, want)) in params.iter().zip(&net.params).enumerate() {
            if have.shape() != want.shape() {
                return Err(Error::Format(format!(
                    "parameter {i} has shape {:?}, expected {:?}",
                    have.shape(),
                    want.shape()
                )));
            }
        }
        if running.len() != net.running.len()
            || running.iter().zip(&net.running).any(|(a, b)| a.is_some() != b.is_some())
        {
            return Err(Error::Format("running statistics do not match the layer stack".into()));
        }
        net.params = params;
        net.running = running;
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    /// Batch-norm running statistics, one slot per layer.
    pub fn running_stats(&self) -> &[Option<RunningStats>] {
        &self.running
    }

    pub fn count_parameters(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    fn shape_input(&self, x: &Tensor) -> Result<Tensor> {
        let want = self.spec.input_len();
        let per_sample: usize = x.shape()[1..].iter().product();
        if x.shape().len() < 2 || per_sample != want {
            return Err(Error::Dimension {
                layer: 0,
                message: format!("input batch {:?} does not match sample shape {:?}", x.shape(), self.spec.input_shape),
            });
        }
        let mut shape = vec![x.batch()];
        shape.extend_from_slice(&self.spec.input_shape);
        x.clone().reshape(shape)
    }

    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Tensor, mode: Mode, rng: &mut R) -> Result<Tensor> {
        match mode {
            Mode::Train => self.forward_train(x, rng),
            Mode::Infer => self.infer(x),
        }
    }

    /// Inference pass: dropout is the identity and batch norm uses its
    /// running statistics.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = self.shape_input(x)?;
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let p = &self.params[self.slots[i].clone()];
            h = match *layer {
                LayerSpec::Dense { activation, .. } => layers::dense_forward(&h, &p[0], &p[1], activation),
                LayerSpec::Conv1D { activation, .. } => layers::conv1d_forward(&h, &p[0], &p[1], activation),
                LayerSpec::MaxPool1D { pool_size } => layers::maxpool_forward(&h, pool_size).0,
                LayerSpec::BatchNorm { epsilon, .. } => {
                    layers::batchnorm_infer(&h, &p[0], &p[1], self.running[i].as_ref().unwrap(), epsilon)
                }
                LayerSpec::Dropout { .. } => h,
                LayerSpec::Lstm { .. } => layers::lstm_forward(&h, &p[0], &p[1], &p[2], false).0,
                LayerSpec::Flatten => {
                    let n = h.batch();
                    let w = h.len() / n;
                    h.reshape(vec![n, w])?
                }
            };
        }
        Ok(h)
    }

    /// Train-mode pass; records intermediates for [`backward`](Self::backward)
    /// and updates batch-norm running statistics.
    pub fn forward_train<R: Rng + ?Sized>(&mut self, x: &Tensor, rng: &mut R) -> Result<Tensor> {
        let mut h = self.shape_input(x)?;
        let mut caches = Vec::with_capacity(self.spec.layers.len());
        for i in 0..self.spec.layers.len() {
            let layer = &self.spec.layers[i];
            let p = &self.params[self.slots[i].clone()];
            let (out, cache) = match *layer {
                LayerSpec::Dense { activation, .. } => {
                    let y = layers::dense_forward(&h, &p[0], &p[1], activation);
                    (y.clone(), LayerCache::Dense { input: h, output: y })
                }
                LayerSpec::Conv1D { activation, .. } => {
                    let y = layers::conv1d_forward(&h, &p[0], &p[1], activation);
                    (y.clone(), LayerCache::Conv1D { input: h, output: y })
                }
                LayerSpec::MaxPool1D { pool_size } => {
                    let (y, argmax) = layers::maxpool_forward(&h, pool_size);
                    (y, LayerCache::MaxPool { in_shape: h.shape().to_vec(), argmax })
                }
                LayerSpec::BatchNorm { momentum, epsilon } => {
                    let (y, xhat, inv_std, mean, var) = layers::batchnorm_train(&h, &p[0], &p[1], epsilon);
                    let stats = self.running[i].as_mut().unwrap();
                    for c in 0..mean.len() {
                        stats.mean[c] = momentum * stats.mean[c] + (1.0 - momentum) * mean[c];
                        stats.var[c] = momentum * stats.var[c] + (1.0 - momentum) * var[c];
                    }
                    (y, LayerCache::BatchNorm { xhat, inv_std })
                }
                LayerSpec::Dropout { rate } => {
                    let mask = if rate > 0.0 { layers::dropout_mask(h.len(), rate, rng) } else { vec![1.0; h.len()] };
                    (layers::apply_mask(&h, &mask), LayerCache::Dropout { mask })
                }
                LayerSpec::Lstm { .. } => {
                    let (y, cache) = layers::lstm_forward(&h, &p[0], &p[1], &p[2], true);
                    (y, LayerCache::Lstm(Box::new(cache.unwrap())))
                }
                LayerSpec::Flatten => {
                    let in_shape = h.shape().to_vec();
                    let n = h.batch();
                    let w = h.len() / n;
                    (h.reshape(vec![n, w])?, LayerCache::Flatten { in_shape })
                }
            };
            caches.push(cache);
            h = out;
        }
        self.cache = Some((x.batch(), caches));
        Ok(h)
    }

    /// Backpropagates `grad` (w.r.t. the last forward output) and returns one
    /// gradient per parameter array, aligned with [`params`](Self::params).
    /// Consumes the intermediates of the preceding train-mode forward pass.
    pub fn backward(&mut self, grad: &Tensor) -> Result<Vec<Tensor>> {
        let (batch, caches) = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward called without a preceding train-mode forward pass".into()))?;
        let out_shape = self.shapes.last().unwrap();
        let mut expected = vec![batch];
        expected.extend_from_slice(out_shape);
        if grad.shape() != expected.as_slice() {
            return Err(Error::Shape(format!("upstream gradient {:?}, expected {expected:?}", grad.shape())));
        }

        let mut grads: Vec<Option<Tensor>> = vec![None; self.params.len()];
        let mut g = grad.clone();
        for (i, cache) in caches.iter().enumerate().rev() {
            let p = &self.params[self.slots[i].clone()];
            let (dx, dp) = match (&self.spec.layers[i], cache) {
                (LayerSpec::Dense { activation, .. }, LayerCache::Dense { input, output }) => {
                    layers::dense_backward(input, output, &p[0], *activation, &g)
                }
                (LayerSpec::Conv1D { activation, .. }, LayerCache::Conv1D { input, output }) => {
                    layers::conv1d_backward(input, output, &p[0], *activation, &g)
                }
                (LayerSpec::MaxPool1D { .. }, LayerCache::MaxPool { in_shape, argmax }) => {
                    (layers::maxpool_backward(in_shape, argmax, &g), vec![])
                }
                (LayerSpec::BatchNorm { .. }, LayerCache::BatchNorm { xhat, inv_std }) => {
                    layers::batchnorm_backward(xhat, inv_std, &p[0], &g)
                }
                (LayerSpec::Dropout { .. }, LayerCache::Dropout { mask }) => (layers::apply_mask(&g, mask), vec![]),
                (LayerSpec::Lstm { .. }, LayerCache::Lstm(c)) => layers::lstm_backward(c, &p[0], &p[1], &g),
                (LayerSpec::Flatten, LayerCache::Flatten { in_shape }) => (g.reshape(in_shape.clone())?, vec![]),
                _ => unreachable!("cache built from the same layer list"),
            };
            for (slot, d) in self.slots[i].clone().zip(dp) {
                grads[slot] = Some(d);
            }
            g = dx;
        }
        Ok(grads.into_iter().map(|g| g.expect("every parameter receives a gradient")).collect())
    }

    /// Drops any recorded intermediates.
    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::Activation;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn dense_net(w: Vec<f64>, b: Vec<f64>, n_in: usize, units: usize, act: Activation) -> Network {
        let spec = NetworkSpec::new(vec![n_in], vec![LayerSpec::dense(units, act)]);
        let params = vec![Tensor::new(vec![n_in, units], w).unwrap(), Tensor::new(vec![units], b).unwrap()];
        Network::from_parts(spec, params, vec![None]).unwrap()
    }

    #[test]
    fn dense_examples() {
        let net = dense_net(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], 2, 2, Activation::Linear);
        let y = net.infer(&Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0]);

        let net = dense_net(vec![2.0, 3.0], vec![1.0], 2, 1, Activation::Linear);
        let y = net.infer(&Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(y.data(), &[6.0]);

        let net = dense_net(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], 2, 2, Activation::Relu);
        let y = net.infer(&Tensor::new(vec![1, 2], vec![-3.0, 2.0]).unwrap()).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0]);
    }

    #[test]
    fn input_mismatch_names_layer() {
        let net = dense_net(vec![1.0, 0.0], vec![0.0], 2, 1, Activation::Linear);
        let err = net.infer(&Tensor::new(vec![1, 3], vec![0.0; 3]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Dimension { layer: 0, .. }));

        let bad = NetworkSpec::new(vec![4, 1], vec![LayerSpec::dense(3, Activation::Relu)]);
        assert!(matches!(bad.shapes(), Err(Error::Dimension { layer: 0, .. })));
        let bad = NetworkSpec::new(
            vec![4],
            vec![LayerSpec::dense(3, Activation::Relu), LayerSpec::MaxPool1D { pool_size: 2 }],
        );
        assert!(matches!(bad.shapes(), Err(Error::Dimension { layer: 1, .. })));
    }

    #[test]
    fn backward_requires_cache() {
        let mut net = dense_net(vec![1.0, 0.0], vec![0.0], 2, 1, Activation::Linear);
        let g = Tensor::new(vec![1, 1], vec![1.0]).unwrap();
        assert!(matches!(net.backward(&g), Err(Error::State(_))));
        let x = Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap();
        net.forward_train(&x, &mut rng()).unwrap();
        assert!(net.backward(&g).is_ok());
        // The cache is consumed.
        assert!(matches!(net.backward(&g), Err(Error::State(_))));
    }

    #[test]
    fn zero_residual_gives_zero_gradients() {
        let mut net = dense_net(vec![0.5, -0.25], vec![0.1], 2, 1, Activation::Linear);
        let x = Tensor::new(vec![2, 2], vec![1.0, 2.0, -1.0, 0.5]).unwrap();
        let pred = net.forward_train(&x, &mut rng()).unwrap();
        let (_, grad) = crate::nn::loss::Loss::Mse.evaluate(&pred, &pred.clone()).unwrap();
        for g in net.backward(&grad).unwrap() {
            assert!(g.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn one_unit_chain_rule() {
        // y = w x + b, L = (y - t)^2 with x = 2, w = 0.5, b = 0.25, t = 3:
        // y = 1.25, dL/dy = -3.5, dL/dw = -7, dL/db = -3.5.
        let mut net = dense_net(vec![0.5], vec![0.25], 1, 1, Activation::Linear);
        let x = Tensor::new(vec![1, 1], vec![2.0]).unwrap();
        let t = Tensor::new(vec![1, 1], vec![3.0]).unwrap();
        let y = net.forward_train(&x, &mut rng()).unwrap();
        assert_eq!(y.data(), &[1.25]);
        let (_, g) = crate::nn::loss::Loss::Mse.evaluate(&y, &t).unwrap();
        let grads = net.backward(&g).unwrap();
        assert_eq!(grads[0].data(), &[-7.0]);
        assert_eq!(grads[1].data(), &[-3.5]);
    }

    #[test]
    fn gradient_shapes_match_parameters() {
        let spec = NetworkSpec::new(
            vec![8, 1],
            vec![
                LayerSpec::Conv1D { filters: 4, kernel_size: 3, activation: Activation::Relu },
                LayerSpec::batch_norm(),
                LayerSpec::MaxPool1D { pool_size: 2 },
                LayerSpec::Dropout { rate: 0.3 },
                LayerSpec::Flatten,
                LayerSpec::dense(1, Activation::Sigmoid),
            ],
        );
        let mut net = Network::new(spec, 3).unwrap();
        let x = Tensor::new(vec![5, 8], (0..40).map(|v| (v as f64 * 0.37).sin()).collect()).unwrap();
        let y = net.forward_train(&x, &mut rng()).unwrap();
        assert_eq!(y.shape(), &[5, 1]);
        let grads = net.backward(&Tensor::filled(&[5, 1], 1.0)).unwrap();
        assert_eq!(grads.len(), net.params().len());
        for (g, p) in grads.iter().zip(net.params()) {
            assert_eq!(g.shape(), p.shape());
        }
    }

    #[test]
    fn dropout_zero_rate_train_equals_infer() {
        let spec = NetworkSpec::new(
            vec![6],
            vec![
                LayerSpec::dense(4, Activation::Relu),
                LayerSpec::Dropout { rate: 0.0 },
                LayerSpec::dense(1, Activation::Sigmoid),
            ],
        );
        let mut net = Network::new(spec, 11).unwrap();
        let x = Tensor::new(vec![3, 6], (0..18).map(|v| v as f64 / 10.0).collect()).unwrap();
        let a = net.forward_train(&x, &mut rng()).unwrap();
        let b = net.infer(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let spec = NetworkSpec::new(vec![5], vec![LayerSpec::dense(3, Activation::Relu)]);
        let a = Network::new(spec.clone(), 42).unwrap();
        let b = Network::new(spec.clone(), 42).unwrap();
        let c = Network::new(spec, 43).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
        let limit = (6.0f64 / 8.0).sqrt();
        assert!(a.params()[0].data().iter().all(|w| w.abs() < limit));
        assert!(a.params()[1].data().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(NetworkSpec::new(vec![3], vec![]).count_parameters().unwrap(), 0);
        let d = NetworkSpec::new(vec![2], vec![LayerSpec::dense(3, Activation::Linear)]);
        assert_eq!(d.count_parameters().unwrap(), 9);
        let l = NetworkSpec::new(vec![21, 1], vec![LayerSpec::Lstm { units: 32 }]);
        assert_eq!(l.count_parameters().unwrap(), 4352);
        let net = Network::new(l, 0).unwrap();
        assert_eq!(net.count_parameters(), 4352);
    }
}
