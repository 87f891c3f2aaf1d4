//! Elephant/mouse flow classification toolkit.
//!
//! Flow records are labeled by threshold heuristics ([`flow`]), ingested
//! from CSV tables ([`ingest`]), and used to train four detector families
//! ([`models`], [`ae`]) on a small built-in neural-network engine ([`nn`]).
//! [`eval`] holds the stratified cross-validation harness, epoch and batch
//! sweeps, and the model-comparison report.

pub mod ae;
pub mod error;
pub mod eval;
pub mod flow;
pub mod ingest;
pub mod models;
pub mod nn;
pub mod synth;

mod seed;

pub use error::{Error, Result};
pub use flow::{label_dataset, label_flow, CombinationRule, FlowLabel, FlowRecord, LabelingPolicy};
pub use ingest::{DatasetSchema, FeatureMatrix, NormalizationMethod, NormalizationParams};
pub use models::{Family, ModelConfig, TrainedModel};
pub use seed::derive_seed;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_240_521;
