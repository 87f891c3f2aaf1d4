//! A small double-precision neural-network engine: dense, 1-D convolution,
//! max pooling, batch normalization, dropout and LSTM layers, three losses,
//! Adam, and a finite-difference gradient checker.

mod gradcheck;
mod layers;
mod loss;
mod network;
mod optim;
mod tensor;

pub use gradcheck::{grad_check, GradCheck};
pub use layers::{Activation, LayerSpec, RunningStats};
pub use loss::{per_sample_msle, Loss, PROB_EPS};
pub use network::{Mode, Network, NetworkSpec};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
