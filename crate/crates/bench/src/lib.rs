//! Shared inputs for the engine benchmarks.

use elephant_core::nn::Tensor;
use elephant_core::FlowLabel;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `rows x cols` tensor of uniform values in [0, 1).
pub fn uniform_batch(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| rng.gen::<f64>()).collect();
    Tensor::new(vec![rows, cols], data).expect("shape matches data")
}

/// Labels with the first `elephants` rows positive.
pub fn labels(n: usize, elephants: usize) -> Vec<FlowLabel> {
    (0..n).map(|i| FlowLabel::from(i < elephants)).collect()
}
