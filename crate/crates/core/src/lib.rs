//! Benchmark of how additive noise in training data affects standard and
//! depthwise-separable 1D CNN classifiers.
//!
//! Pipeline per experiment cell: load or synthesize records, split by class,
//! cut windows, corrupt the training windows (white Gaussian noise or a
//! linear ramp), optionally augment them (oversampling or per-class GMM
//! sampling), standardize, train, and score macro F1 on the clean test split.

pub mod augment;
pub mod data;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod metrics;
pub mod nn;
pub mod noise;
pub mod rng;

pub use error::{Error, Result};
pub use exec::Execution;
