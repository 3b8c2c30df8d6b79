//! Mini-batch Adam trainer with plateau learning-rate decay.
//!
//! Training is deterministic for a fixed seed: batch shuffling, weight
//! initialization and augmentation all derive from split streams, and the
//! per-sample gradients computed in parallel are reduced in batch order.

use rayon::prelude::*;

use crate::attack::{apply_attack, attack_catalogue};
use crate::decoder::augment::augment;
use crate::decoder::checkpoint::Checkpoint;
use crate::decoder::config::{DecoderConfig, TrainConfig};
use crate::decoder::net::{bce_loss, forward, loss_and_gradient, DecoderParams, Scalar};
use crate::error::{Error, Result};
use crate::geometry::{normalize, PointCloud};
use crate::rng::{mix64, SplitMix64};

/// One training or validation example: a normalized watermarked cloud and
/// its ground-truth payload.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub cloud: PointCloud,
    pub bits: Vec<u8>,
}

/// Per-epoch log row; mirrors the training-log CSV columns.
#[derive(Debug, Clone)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub per_bit_acc: Vec<f64>,
    pub lr: f64,
}

/// Trained checkpoint plus the full epoch log.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
}

impl TrainReport {
    /// Render the log as CSV with the documented column set.
    pub fn log_csv(&self) -> String {
        let n_bits = self
            .log
            .first()
            .map(|row| row.per_bit_acc.len())
            .unwrap_or(0);
        let mut out = String::from("epoch,train_loss,val_loss,train_acc,val_acc");
        for bit in 0..n_bits {
            out.push_str(&format!(",per_bit_acc_{bit}"));
        }
        out.push_str(",lr\n");
        for row in &self.log {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6}",
                row.epoch, row.train_loss, row.val_loss, row.train_acc, row.val_acc
            ));
            for acc in &row.per_bit_acc {
                out.push_str(&format!(",{acc:.6}"));
            }
            out.push_str(&format!(",{:.6e}\n", row.lr));
        }
        out
    }
}

struct Adam {
    m: DecoderParams<f32>,
    v: DecoderParams<f32>,
    step: usize,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    fn new(config: &DecoderConfig, tc: &TrainConfig) -> Adam {
        Adam {
            m: DecoderParams::zeros(config),
            v: DecoderParams::zeros(config),
            step: 0,
            beta1: tc.beta1,
            beta2: tc.beta2,
            epsilon: tc.epsilon,
        }
    }

    fn update(&mut self, params: &mut DecoderParams<f32>, grads: &DecoderParams<f32>, lr: f64) {
        self.step += 1;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let correction1 = 1.0 - self.beta1.powi(self.step as i32);
        let correction2 = 1.0 - self.beta2.powi(self.step as i32);
        let eps = self.epsilon as f32;
        let lr = lr as f32;
        for ((p, g), (m, v)) in params
            .layers_mut()
            .into_iter()
            .zip(grads.layers())
            .zip(self.m.layers_mut().into_iter().zip(self.v.layers_mut()))
        {
            for i in 0..p.weights.len() {
                m.weights[i] = b1 * m.weights[i] + (1.0 - b1) * g.weights[i];
                v.weights[i] = b2 * v.weights[i] + (1.0 - b2) * g.weights[i] * g.weights[i];
                let m_hat = m.weights[i] / correction1 as f32;
                let v_hat = v.weights[i] / correction2 as f32;
                p.weights[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            for i in 0..p.bias.len() {
                m.bias[i] = b1 * m.bias[i] + (1.0 - b1) * g.bias[i];
                v.bias[i] = b2 * v.bias[i] + (1.0 - b2) * g.bias[i] * g.bias[i];
                let m_hat = m.bias[i] / correction1 as f32;
                let v_hat = v.bias[i] / correction2 as f32;
                p.bias[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Corrupt one training input per the augmentation flags. Falls back to the
/// clean cloud when a corruption leaves too few points for the decoder.
fn corrupt(
    cloud: &PointCloud,
    config: &DecoderConfig,
    tc: &TrainConfig,
    stream: u64,
) -> PointCloud {
    let mut out = cloud.clone();
    if tc.augment_with_attacks {
        let mut rng = SplitMix64::stream(stream, 1);
        if rng.uniform() < 0.5 {
            let catalogue = attack_catalogue(rng.next_u64());
            let spec = &catalogue[rng.below(catalogue.len())];
            if let Ok(attacked) = apply_attack(&out, spec) {
                if let Ok((renormed, _)) = normalize(&attacked) {
                    if renormed.len() >= config.min_points() {
                        out = renormed;
                    }
                }
            }
        }
    }
    if tc.augment {
        let candidate = augment(&out, mix64(stream ^ 0xA0A0_5151));
        if candidate.len() >= config.min_points() {
            out = candidate;
        }
    }
    out
}

/// Train a decoder. `train_set` drives the gradient steps (augmented per
/// the config); `val_set` is evaluated clean after every epoch, steers the
/// plateau scheduler, and selects the returned best checkpoint.
pub fn train(
    train_set: &[TrainSample],
    val_set: &[TrainSample],
    config: &DecoderConfig,
    tc: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    tc.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for sample in train_set.iter().chain(val_set) {
        if sample.bits.len() != config.n_bits {
            return Err(Error::ShapeMismatch(format!(
                "sample has {} bits, config expects {}",
                sample.bits.len(),
                config.n_bits
            )));
        }
    }

    let mut params = DecoderParams::<f32>::init(config, tc.seed);
    let mut adam = Adam::new(config, tc);
    let mut lr = tc.lr;
    let mut best: Option<(f64, u32, DecoderParams<f32>)> = None;
    let mut plateau_best = f64::INFINITY;
    let mut plateau_age = 0usize;
    let mut log = Vec::with_capacity(tc.epochs);

    for epoch in 0..tc.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        SplitMix64::stream(tc.seed, 0x1000 + epoch as u64).shuffle(&mut order);

        let mut train_loss_sum = 0.0;
        let mut train_bits_right = 0usize;
        let mut train_bits_total = 0usize;
        for batch in order.chunks(tc.batch_size) {
            let results: Vec<(f64, DecoderParams<f32>, usize)> = batch
                .par_iter()
                .map(|&idx| {
                    let sample = &train_set[idx];
                    let stream = mix64(tc.seed ^ (epoch as u64) << 32 ^ idx as u64);
                    let input = corrupt(&sample.cloud, config, tc, stream);
                    let (loss, grads) =
                        loss_and_gradient(&input, &sample.bits, &params, config)?;
                    let logits = forward(&input, &params, config)?;
                    let right = logits
                        .iter()
                        .zip(&sample.bits)
                        .filter(|(&z, &b)| u8::from(z > 0.0) == b)
                        .count();
                    Ok((loss.to_f64(), grads, right))
                })
                .collect::<Result<_>>()?;

            let mut batch_grads = DecoderParams::<f32>::zeros(config);
            let mut batch_loss = 0.0;
            for (loss, grads, right) in &results {
                batch_loss += loss;
                batch_grads.accumulate(grads, 1.0 / batch.len() as f32);
                train_bits_right += right;
                train_bits_total += config.n_bits;
            }
            batch_loss /= batch.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::DivergedLoss(epoch));
            }
            train_loss_sum += batch_loss * batch.len() as f64;
            adam.update(&mut params, &batch_grads, lr);
        }
        let train_loss = train_loss_sum / train_set.len() as f64;
        let train_acc = train_bits_right as f64 / train_bits_total.max(1) as f64;

        // Clean validation pass.
        let val: Vec<(f64, Vec<bool>)> = val_set
            .par_iter()
            .map(|sample| {
                let logits = forward(&sample.cloud, &params, config)?;
                let loss = bce_loss(&logits, &sample.bits)?.to_f64();
                let hits = logits
                    .iter()
                    .zip(&sample.bits)
                    .map(|(&z, &b)| u8::from(z > 0.0) == b)
                    .collect();
                Ok((loss, hits))
            })
            .collect::<Result<_>>()?;
        let val_loss = val.iter().map(|(l, _)| l).sum::<f64>() / val_set.len() as f64;
        if !val_loss.is_finite() {
            return Err(Error::DivergedLoss(epoch));
        }
        let mut per_bit_hits = vec![0usize; config.n_bits];
        for (_, hits) in &val {
            for (slot, hit) in per_bit_hits.iter_mut().zip(hits) {
                *slot += usize::from(*hit);
            }
        }
        let per_bit_acc: Vec<f64> = per_bit_hits
            .iter()
            .map(|&h| h as f64 / val_set.len() as f64)
            .collect();
        let val_acc = per_bit_acc.iter().sum::<f64>() / config.n_bits as f64;

        log.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
            train_acc,
            val_acc,
            per_bit_acc,
            lr,
        });

        if best.as_ref().is_none_or(|(acc, _, _)| val_acc > *acc) {
            best = Some((val_acc, epoch as u32, params.clone()));
        }

        // Reduce-on-plateau against validation loss.
        if val_loss < plateau_best {
            plateau_best = val_loss;
            plateau_age = 0;
        } else {
            plateau_age += 1;
            if plateau_age > tc.scheduler.patience {
                lr = (lr * tc.scheduler.factor).max(tc.scheduler.min_lr);
                plateau_age = 0;
            }
        }
    }

    let (best_val_accuracy, epoch, best_params) = best.expect("at least one epoch ran");
    Ok(TrainReport {
        checkpoint: Checkpoint {
            config: config.clone(),
            params: best_params,
            best_val_accuracy,
            epoch,
        },
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::watermark::{embed, Mode, Watermark};

    fn make_samples(count: usize, n_bits: usize, seed: u64) -> Vec<TrainSample> {
        let mut rng = SplitMix64::new(seed);
        (0..count)
            .map(|i| {
                let points = (0..64)
                    .map(|_| {
                        [
                            rng.uniform_in(-1.0, 1.0),
                            rng.uniform_in(-0.5, 0.5),
                            rng.uniform_in(-0.3, 0.3),
                        ]
                    })
                    .collect();
                let cloud = normalize(&PointCloud::new(points)).unwrap().0;
                let bits: Vec<u8> = (0..n_bits).map(|b| ((i >> b) & 1) as u8).collect();
                TrainSample { cloud, bits }
            })
            .collect()
    }

    fn quick_config() -> (DecoderConfig, TrainConfig) {
        (
            DecoderConfig::tiny(2),
            TrainConfig {
                epochs: 3,
                batch_size: 8,
                augment: false,
                ..TrainConfig::default()
            },
        )
    }

    #[test]
    fn deterministic_checkpoints() {
        let samples = make_samples(16, 2, 1);
        let (config, tc) = quick_config();
        let a = train(&samples, &samples, &config, &tc).unwrap();
        let b = train(&samples, &samples, &config, &tc).unwrap();
        assert_eq!(a.checkpoint, b.checkpoint);
        assert_eq!(a.log.len(), 3);
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let samples = make_samples(8, 2, 2);
        let (config, mut tc) = quick_config();
        tc.lr = 0.0;
        let initial = DecoderParams::<f32>::init(&config, tc.seed);
        let report = train(&samples, &samples, &config, &tc).unwrap();
        assert_eq!(report.checkpoint.params, initial);
    }

    #[test]
    fn empty_dataset_rejected() {
        let (config, tc) = quick_config();
        assert!(matches!(
            train(&[], &make_samples(4, 2, 3), &config, &tc),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn loss_decreases_on_separable_task() {
        // Watermarked clouds from two distinct patterns; a tiny decoder
        // should reduce loss within a few epochs.
        let mut samples = Vec::new();
        let mut rng = SplitMix64::new(9);
        for i in 0..16 {
            let points = (0..96)
                .map(|_| {
                    [
                        rng.uniform_in(-1.0, 1.0),
                        rng.uniform_in(-0.6, 0.6),
                        rng.uniform_in(-0.3, 0.3),
                    ]
                })
                .collect();
            let cloud = normalize(&PointCloud::new(points)).unwrap().0;
            let wm = Watermark::from_index(i % 4, 2).unwrap();
            let (marked, _) = embed(&cloud, &wm, 2.0, Mode::Reference).unwrap();
            samples.push(TrainSample {
                cloud: marked,
                bits: wm.bits().to_vec(),
            });
        }
        let config = DecoderConfig::tiny(2);
        let tc = TrainConfig {
            epochs: 12,
            batch_size: 8,
            augment: false,
            ..TrainConfig::default()
        };
        let report = train(&samples, &samples, &config, &tc).unwrap();
        let first = report.log.first().unwrap().train_loss;
        let last = report.log.last().unwrap().train_loss;
        assert!(last <= first, "{last} > {first}");
    }

    #[test]
    fn log_csv_headers() {
        let samples = make_samples(8, 2, 5);
        let (config, tc) = quick_config();
        let report = train(&samples, &samples, &config, &tc).unwrap();
        let csv = report.log_csv();
        assert!(csv.starts_with(
            "epoch,train_loss,val_loss,train_acc,val_acc,per_bit_acc_0,per_bit_acc_1,lr\n"
        ));
        assert_eq!(csv.lines().count(), 1 + 3);
    }
}
