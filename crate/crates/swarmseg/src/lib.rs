//! Semi-supervised adversarial segmentation of thin curvilinear structures,
//! with particle-swarm selection of the loss hyperparameters.
//!
//! The crate is a vertical slice of a small research stack:
//!
//! - [`tensor`]: dense NCHW tensors with reverse-mode autodiff and Adam.
//! - [`losses`]: supervised, adversarial, and confidence-masked
//!   self-training objectives composed on the tape.
//! - [`models`]: a compact encoder-decoder segmenter and a fully
//!   convolutional discriminator, plus binary checkpoints.
//! - [`pso`]: global-best particle swarm optimization with time-varying
//!   inertia, used to pick the loss weights.
//! - [`data`]: deterministic synthetic vessel-like images, PPM/PGM I/O,
//!   dataset manifests, augmentation.
//! - [`metrics`]: ROC AUC, PR AUC, and their combined score.
//! - [`train`]: the alternating adversarial training loop, evaluation,
//!   ablation, and swarm-driven hyperparameter tuning.
//!
//! Everything is deterministic given a seed: training histories, checkpoints,
//! traces, and generated datasets are bit-reproducible.

pub mod cli;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod pso;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
