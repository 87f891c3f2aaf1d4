use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::loss::Loss;
use crate::nn::network::Network;
use crate::nn::tensor::Tensor;

/// Gradients smaller than this in magnitude are compared absolutely.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    /// Index of the parameter array holding the worst element.
    pub worst_param: usize,
    pub worst_element: usize,
    pub checked: usize,
}

/// Compares backpropagated parameter gradients against central finite
/// differences of the train-mode loss.
///
/// Every loss evaluation reseeds the dropout generator, so the same masks
/// are used throughout; networks with dropout can be checked too. The
/// passed network is left untouched.
pub fn grad_check(network: &Network, batch: &Tensor, target: &Tensor, loss: Loss, epsilon: f64) -> Result<GradCheck> {
    const MASK_SEED: u64 = 0x9e37_79b9;
    let mut net = network.clone();
    let eval = |net: &mut Network| -> Result<f64> {
        let pred = net.forward_train(batch, &mut ChaCha8Rng::seed_from_u64(MASK_SEED))?;
        net.clear_cache();
        loss.value(&pred, target)
    };

    let pred = net.forward_train(batch, &mut ChaCha8Rng::seed_from_u64(MASK_SEED))?;
    let (_, upstream) = loss.evaluate(&pred, target)?;
    let analytic = net.backward(&upstream)?;

    let mut report = GradCheck { max_relative_error: 0.0, worst_param: 0, worst_element: 0, checked: 0 };
    for (p, grad) in analytic.iter().enumerate() {
        for (e, &a) in grad.data().iter().enumerate() {
            let orig = net.params()[p].data()[e];
            net.params_mut()[p].data_mut()[e] = orig + epsilon;
            let up = eval(&mut net)?;
            net.params_mut()[p].data_mut()[e] = orig - epsilon;
            let down = eval(&mut net)?;
            net.params_mut()[p].data_mut()[e] = orig;

            let numeric = (up - down) / (2.0 * epsilon);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            report.checked += 1;
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst_param = p;
                report.worst_element = e;
            }
        }
    }
    Ok(report)
}
