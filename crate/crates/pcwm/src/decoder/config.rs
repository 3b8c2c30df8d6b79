//! Decoder architecture and training configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One set-abstraction stage: sample `centroids` by farthest-point sampling,
/// group `k` nearest neighbors, featurize through a shared MLP, max-pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetAbstraction {
    pub centroids: usize,
    pub k: usize,
    /// Layer widths including the input width, e.g. `[3, 32, 64]`.
    pub mlp: Vec<usize>,
}

/// Hierarchical decoder: two set-abstraction stages, global max-pool, MLP
/// head emitting one logit per watermark bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderConfig {
    pub n_bits: usize,
    pub sa1: SetAbstraction,
    pub sa2: SetAbstraction,
    /// Head widths including input, e.g. `[128, 64, n_bits]`.
    pub head: Vec<usize>,
}

impl DecoderConfig {
    /// The desk-scale default: 256/64 centroids, k=16, 64/128 channels.
    pub fn standard(n_bits: usize) -> DecoderConfig {
        DecoderConfig {
            n_bits,
            sa1: SetAbstraction {
                centroids: 256,
                k: 16,
                mlp: vec![3, 32, 64],
            },
            sa2: SetAbstraction {
                centroids: 64,
                k: 16,
                mlp: vec![67, 128],
            },
            head: vec![128, 64, n_bits],
        }
    }

    /// Minutes-scale configuration for capacity checks and gradient tests.
    pub fn tiny(n_bits: usize) -> DecoderConfig {
        DecoderConfig {
            n_bits,
            sa1: SetAbstraction {
                centroids: 8,
                k: 4,
                mlp: vec![3, 4],
            },
            sa2: SetAbstraction {
                centroids: 4,
                k: 4,
                mlp: vec![7, 8],
            },
            head: vec![8, 4, n_bits],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_bits == 0 {
            return fail("n_bits must be positive".into());
        }
        if self.sa1.mlp.len() < 2 || self.sa2.mlp.len() < 2 || self.head.len() < 2 {
            return fail("every MLP needs an input and at least one output width".into());
        }
        if self.sa1.mlp[0] != 3 {
            return fail(format!("sa1 input width must be 3, got {}", self.sa1.mlp[0]));
        }
        let sa1_out = *self.sa1.mlp.last().unwrap();
        if self.sa2.mlp[0] != 3 + sa1_out {
            return fail(format!(
                "sa2 input width must be 3 + sa1 output = {}, got {}",
                3 + sa1_out,
                self.sa2.mlp[0]
            ));
        }
        let sa2_out = *self.sa2.mlp.last().unwrap();
        if self.head[0] != sa2_out {
            return fail(format!(
                "head input width must equal sa2 output = {sa2_out}, got {}",
                self.head[0]
            ));
        }
        if *self.head.last().unwrap() != self.n_bits {
            return fail(format!(
                "head output width must equal n_bits = {}, got {}",
                self.n_bits,
                self.head.last().unwrap()
            ));
        }
        if self.sa1.centroids == 0 || self.sa2.centroids == 0 {
            return fail("centroid counts must be positive".into());
        }
        if self.sa2.centroids > self.sa1.centroids {
            return fail(format!(
                "sa2 centroids ({}) must not exceed sa1 centroids ({})",
                self.sa2.centroids, self.sa1.centroids
            ));
        }
        if self.sa1.k == 0 || self.sa2.k == 0 {
            return fail("neighbor counts must be positive".into());
        }
        Ok(())
    }

    /// Total trainable parameter count.
    pub fn parameter_count(&self) -> usize {
        let mlp = |widths: &[usize]| {
            widths
                .windows(2)
                .map(|w| w[0] * w[1] + w[1])
                .sum::<usize>()
        };
        mlp(&self.sa1.mlp) + mlp(&self.sa2.mlp) + mlp(&self.head)
    }

    /// Minimum cloud size accepted by `forward`.
    pub fn min_points(&self) -> usize {
        self.sa1.centroids
    }
}

/// Plateau learning-rate schedule: multiply by `factor` after `patience`
/// epochs without validation-loss improvement, never below `min_lr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlateauSchedule {
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
}

impl Default for PlateauSchedule {
    fn default() -> Self {
        PlateauSchedule {
            factor: 0.5,
            patience: 5,
            min_lr: 1e-5,
        }
    }
}

/// Trainer hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub scheduler: PlateauSchedule,
    pub seed: u64,
    /// Stochastic noise/scale/rotation/dropout pipeline on training inputs.
    pub augment: bool,
    /// Additionally corrupt training inputs with random catalogue attacks.
    pub augment_with_attacks: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 150,
            batch_size: 32,
            lr: 2e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            scheduler: PlateauSchedule::default(),
            seed: 0,
            augment: true,
            augment_with_attacks: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if self.lr.is_nan() || self.lr < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be non-negative, got {}",
                self.lr
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_config_is_valid() {
        DecoderConfig::standard(3).validate().unwrap();
        DecoderConfig::tiny(2).validate().unwrap();
    }

    #[test]
    fn parameter_count_standard() {
        let config = DecoderConfig::standard(3);
        // sa1: 3*32+32 + 32*64+64 = 128 + 2112; sa2: 67*128+128 = 8704;
        // head: 128*64+64 + 64*3+3 = 8256 + 195.
        assert_eq!(config.parameter_count(), 128 + 2112 + 8704 + 8256 + 195);
    }

    #[test]
    fn mismatched_widths_rejected() {
        let mut config = DecoderConfig::standard(3);
        config.sa2.mlp[0] = 64;
        assert!(config.validate().is_err());

        let mut config = DecoderConfig::standard(3);
        config.head = vec![128, 4];
        assert!(config.validate().is_err());
    }

    #[test]
    fn train_config_json_rejects_unknown_keys() {
        let ok: TrainConfig = serde_json::from_str(r#"{"epochs": 10}"#).unwrap();
        assert_eq!(ok.epochs, 10);
        assert_eq!(ok.batch_size, 32);
        let bad = serde_json::from_str::<TrainConfig>(r#"{"warmup": 5}"#);
        assert!(bad.is_err());
    }
}
