//! Permutation-invariant neural watermark decoder.
//!
//! A two-stage set-abstraction hierarchy (farthest-point sampling, k-NN
//! grouping, shared MLPs, max-pooling) maps a normalized point cloud to one
//! logit per watermark bit. The trainer, augmentation pipeline, gradient
//! machinery and checkpoint format live here too.

mod augment;
mod checkpoint;
mod config;
mod net;
mod sampling;
mod train;

pub use augment::augment;
pub use checkpoint::Checkpoint;
pub use config::{DecoderConfig, PlateauSchedule, SetAbstraction, TrainConfig};
pub use net::{
    bce_loss, forward, forward_with_tape, loss_and_gradient, DecoderParams, Dense, Scalar, Tape,
};
pub use sampling::{fps, knn_group};
pub use train::{train, EpochLog, TrainReport, TrainSample};

use crate::error::Result;
use crate::geometry::{normalize, PointCloud};

/// Decode bits from a possibly attacked cloud: renormalize (matching the
/// analytic extractor's pipeline), run the decoder, threshold sigmoid
/// probabilities at one half.
pub fn decode_bits(cloud: &PointCloud, checkpoint: &Checkpoint) -> Result<Vec<u8>> {
    let (normalized, _) = normalize(cloud)?;
    let logits = forward(&normalized, &checkpoint.params, &checkpoint.config)?;
    Ok(logits.iter().map(|&z| u8::from(z > 0.0)).collect())
}

/// Per-bit probabilities under the decoder, for ownership scoring.
pub fn decode_probabilities(cloud: &PointCloud, checkpoint: &Checkpoint) -> Result<Vec<f64>> {
    let (normalized, _) = normalize(cloud)?;
    let logits = forward(&normalized, &checkpoint.params, &checkpoint.config)?;
    Ok(logits
        .iter()
        .map(|&z| 1.0 / (1.0 + (-z as f64).exp()))
        .collect())
}
