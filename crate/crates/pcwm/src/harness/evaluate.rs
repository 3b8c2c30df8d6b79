//! The embed/attack/extract/measure pipeline and its aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{apply_attack, attack_catalogue, AttackSpec};
use crate::decoder::{decode_bits, decode_probabilities, Checkpoint};
use crate::error::{Error, Result};
use crate::harness::manifest::{load_cloud, DatasetManifest, ManifestEntry};
use crate::metrics::{roc_auc, roc_points, MetricSample};
use crate::rng::{fnv1a64, mix64, SplitMix64};
use crate::watermark::{embed, extract, Mode, Watermark};

/// Embedding parameters shared by training and evaluation runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedConfig {
    pub mode: Mode,
    pub alpha: f64,
    pub n_bits: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            mode: Mode::Reference,
            alpha: 2.0,
            n_bits: 3,
        }
    }
}

impl EmbedConfig {
    pub fn from_json(raw: &str) -> Result<EmbedConfig> {
        let config: EmbedConfig = serde_json::from_str(raw)
            .map_err(|e| Error::MalformedRecord(format!("bad embed config JSON: {e}")))?;
        if config.alpha.is_nan() || config.alpha <= 0.0 || config.n_bits == 0 {
            return Err(Error::InvalidConfig(
                "embed config needs alpha > 0 and n_bits >= 1".into(),
            ));
        }
        Ok(config)
    }
}

/// Mean and standard deviation (population) of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricStats {
    pub mean: f64,
    pub std: f64,
}

impl MetricStats {
    fn from_values(values: &[f64]) -> MetricStats {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        MetricStats {
            mean,
            std: var.sqrt(),
        }
    }
}

/// Aggregated metrics for one (attack, decoder) cell.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub attack: String,
    pub decoder: &'static str,
    pub n_samples: usize,
    pub accuracy: MetricStats,
    pub iou: MetricStats,
    pub ber: MetricStats,
    pub chamfer: MetricStats,
    pub psnr: MetricStats,
}

/// Per-attack accuracy comparison between the two decoders.
#[derive(Debug, Clone)]
pub struct GapRow {
    pub attack: String,
    pub svd_accuracy: f64,
    pub dl_accuracy: f64,
    /// `dl_accuracy - svd_accuracy`.
    pub gap: f64,
}

/// Ownership-verification ROC output.
#[derive(Debug, Clone)]
pub struct RocReport {
    /// (threshold, tpr, fpr) staircase points.
    pub points: Vec<(f64, f64, f64)>,
    pub auc: f64,
}

/// Everything a report renders.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub rows: Vec<ResultRow>,
    pub gaps: Vec<GapRow>,
    pub roc: Option<RocReport>,
    pub n_clouds: usize,
    pub skipped: Vec<(String, String)>,
    pub embed_config: EmbedConfig,
}

/// The catalogue plus leading clean row used when the caller passes no
/// attacks.
fn default_attacks(seed: u64) -> Vec<AttackSpec> {
    attack_catalogue(seed)
}

struct CloudOutcome {
    /// Per attack row: accuracy sample per decoder.
    samples: Vec<(MetricSample, MetricSample)>,
}

/// Run the full pipeline over the manifest's test split.
///
/// For every test cloud: embed its assigned watermark, apply each attack
/// (seeded per cloud), extract with the analytic decoder and the neural
/// checkpoint, and compute recovery and fidelity metrics against the
/// pre-attack watermarked cloud. Rows are aggregated per (attack, decoder).
/// Per-cloud failures are collected with reasons; the run aborts only when
/// more than 10% of clouds fail.
pub fn run_evaluation(
    manifest: &DatasetManifest,
    embed_config: &EmbedConfig,
    checkpoint: &Checkpoint,
    attacks: &[AttackSpec],
    run_seed: u64,
) -> Result<ReportBundle> {
    if manifest.test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if checkpoint.config.n_bits != embed_config.n_bits {
        return Err(Error::ShapeMismatch(format!(
            "checkpoint decodes {} bits, embed config says {}",
            checkpoint.config.n_bits, embed_config.n_bits
        )));
    }
    let attacks = if attacks.is_empty() {
        default_attacks(run_seed)
    } else {
        attacks.to_vec()
    };

    let outcomes: Vec<(usize, std::result::Result<CloudOutcome, String>)> = manifest
        .test
        .par_iter()
        .enumerate()
        .map(|(index, entry)| {
            let outcome = evaluate_cloud(
                entry,
                manifest,
                embed_config,
                checkpoint,
                &attacks,
                run_seed,
            )
            .map_err(|e| e.to_string());
            (index, outcome)
        })
        .collect();

    let mut per_cloud = Vec::with_capacity(manifest.test.len());
    let mut skipped = Vec::new();
    for (index, outcome) in outcomes {
        match outcome {
            Ok(o) => per_cloud.push(o),
            Err(reason) => skipped.push((manifest.test[index].relative.clone(), reason)),
        }
    }
    if skipped.len() * 10 > manifest.test.len() {
        return Err(Error::TooManyFailures {
            failed: skipped.len(),
            total: manifest.test.len(),
        });
    }
    if per_cloud.is_empty() {
        return Err(Error::EmptyDataset);
    }

    // Aggregate: row 0 is Clean, then the attack list.
    let row_names: Vec<String> = std::iter::once("Clean".to_string())
        .chain(attacks.iter().map(|a| a.kind.label()))
        .collect();
    let mut rows = Vec::new();
    let mut gaps = Vec::new();
    for (row, name) in row_names.iter().enumerate() {
        let svd: Vec<MetricSample> = per_cloud.iter().map(|c| c.samples[row].0).collect();
        let dl: Vec<MetricSample> = per_cloud.iter().map(|c| c.samples[row].1).collect();
        let collect = |samples: &[MetricSample], decoder: &'static str| ResultRow {
            attack: name.clone(),
            decoder,
            n_samples: samples.len(),
            accuracy: MetricStats::from_values(
                &samples.iter().map(|s| s.accuracy).collect::<Vec<_>>(),
            ),
            iou: MetricStats::from_values(&samples.iter().map(|s| s.iou).collect::<Vec<_>>()),
            ber: MetricStats::from_values(&samples.iter().map(|s| s.ber).collect::<Vec<_>>()),
            chamfer: MetricStats::from_values(
                &samples.iter().map(|s| s.chamfer).collect::<Vec<_>>(),
            ),
            psnr: MetricStats::from_values(&samples.iter().map(|s| s.psnr).collect::<Vec<_>>()),
        };
        let svd_row = collect(&svd, "svd");
        let dl_row = collect(&dl, "dl");
        gaps.push(GapRow {
            attack: name.clone(),
            svd_accuracy: svd_row.accuracy.mean,
            dl_accuracy: dl_row.accuracy.mean,
            gap: dl_row.accuracy.mean - svd_row.accuracy.mean,
        });
        rows.push(svd_row);
        rows.push(dl_row);
    }

    Ok(ReportBundle {
        rows,
        gaps,
        roc: None,
        n_clouds: per_cloud.len(),
        skipped,
        embed_config: *embed_config,
    })
}

fn evaluate_cloud(
    entry: &ManifestEntry,
    manifest: &DatasetManifest,
    embed_config: &EmbedConfig,
    checkpoint: &Checkpoint,
    attacks: &[AttackSpec],
    run_seed: u64,
) -> Result<CloudOutcome> {
    let cloud = load_cloud(entry, manifest.n_points, manifest.seed)?;
    let truth = &entry.watermark;
    let (marked, key) = embed(&cloud, truth, embed_config.alpha, embed_config.mode)?;

    let mut samples = Vec::with_capacity(attacks.len() + 1);
    for (row, attack) in std::iter::once(None)
        .chain(attacks.iter().map(Some))
        .enumerate()
    {
        let attacked = match attack {
            None => marked.clone(),
            Some(spec) => {
                // Per-cloud seed so attack draws differ across the corpus.
                let per_cloud = AttackSpec::new(
                    spec.kind.clone(),
                    mix64(spec.seed ^ fnv1a64(entry.relative.as_bytes()) ^ run_seed
                        ^ (row as u64) << 48),
                );
                apply_attack(&marked, &per_cloud)?
            }
        };
        let svd_bits = extract(&attacked, &key)?;
        let dl_bits = Watermark::new(decode_bits(&attacked, checkpoint)?)?;
        let svd_sample = MetricSample::compute(truth, &svd_bits, &marked, &attacked)?;
        let dl_sample = MetricSample::compute(truth, &dl_bits, &marked, &attacked)?;
        samples.push((svd_sample, dl_sample));
    }
    Ok(CloudOutcome { samples })
}

/// Ownership verification: score the true pattern (positives) and random
/// wrong patterns (negatives) under the decoder on clean watermarked test
/// clouds; AUC is the Mann-Whitney rank statistic.
pub fn ownership_roc(
    manifest: &DatasetManifest,
    embed_config: &EmbedConfig,
    checkpoint: &Checkpoint,
    negatives_per_cloud: usize,
    run_seed: u64,
) -> Result<RocReport> {
    if manifest.test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n_bits = embed_config.n_bits;
    if n_bits < 1 || (negatives_per_cloud > 0 && n_bits > 60) {
        return Err(Error::InvalidConfig("unsupported n_bits for ROC".into()));
    }

    let scored: Vec<std::result::Result<(f64, Vec<f64>), String>> = manifest
        .test
        .par_iter()
        .map(|entry| {
            let run = || -> Result<(f64, Vec<f64>)> {
                let cloud = load_cloud(entry, manifest.n_points, manifest.seed)?;
                let truth = &entry.watermark;
                let (marked, _) = embed(&cloud, truth, embed_config.alpha, embed_config.mode)?;
                let probs = decode_probabilities(&marked, checkpoint)?;
                let score = |wm: &Watermark| -> f64 {
                    wm.bits()
                        .iter()
                        .zip(&probs)
                        .map(|(&b, &p)| if b == 1 { p } else { 1.0 - p })
                        .sum::<f64>()
                        / probs.len() as f64
                };
                let positive = score(truth);
                let mut rng = SplitMix64::stream(
                    run_seed,
                    fnv1a64(entry.relative.as_bytes()) ^ 0x6F77_6E65_7273_6869,
                );
                let truth_index: u64 = truth
                    .bits()
                    .iter()
                    .enumerate()
                    .map(|(i, &b)| (b as u64) << i)
                    .sum();
                let negatives = (0..negatives_per_cloud)
                    .map(|_| {
                        // Uniform wrong pattern.
                        let wrong = loop {
                            let candidate = rng.next_u64() & ((1u64 << n_bits) - 1);
                            if candidate != truth_index {
                                break candidate;
                            }
                        };
                        score(&Watermark::from_index(wrong, n_bits).expect("n_bits >= 1"))
                    })
                    .collect();
                Ok((positive, negatives))
            };
            run().map_err(|e| e.to_string())
        })
        .collect();

    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    let mut failures = 0usize;
    for outcome in scored {
        match outcome {
            Ok((p, negs)) => {
                positives.push(p);
                negatives.extend(negs);
            }
            Err(_) => failures += 1,
        }
    }
    if failures * 10 > manifest.test.len() {
        return Err(Error::TooManyFailures {
            failed: failures,
            total: manifest.test.len(),
        });
    }
    let auc = roc_auc(&positives, &negatives)?;
    let points = roc_points(&positives, &negatives)?;
    Ok(RocReport { points, auc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::{DecoderConfig, DecoderParams};
    use crate::harness::manifest::build_manifest;
    use crate::synthetic::write_dataset;

    fn tiny_checkpoint(n_bits: usize) -> Checkpoint {
        let config = DecoderConfig::tiny(n_bits);
        Checkpoint {
            params: DecoderParams::init(&config, 3),
            config,
            best_val_accuracy: 0.0,
            epoch: 0,
        }
    }

    fn tiny_manifest() -> (tempfile::TempDir, DatasetManifest) {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), 1, 1, 11).unwrap();
        let manifest = build_manifest(dir.path(), 256, 3, 5).unwrap();
        (dir, manifest)
    }

    #[test]
    fn clean_row_svd_accuracy_is_one() {
        let (_dir, manifest) = tiny_manifest();
        let checkpoint = tiny_checkpoint(3);
        let attacks = vec![AttackSpec::new(
            crate::attack::AttackKind::Shuffle {},
            1,
        )];
        let bundle = run_evaluation(
            &manifest,
            &EmbedConfig::default(),
            &checkpoint,
            &attacks,
            7,
        )
        .unwrap();
        let clean_svd = bundle
            .rows
            .iter()
            .find(|r| r.attack == "Clean" && r.decoder == "svd")
            .unwrap();
        assert_eq!(clean_svd.accuracy.mean, 1.0);
        assert_eq!(clean_svd.chamfer.mean, 0.0);

        // Shuffle invariance: the shuffled SVD row matches the clean row
        // exactly on extraction metrics.
        let shuffled_svd = bundle
            .rows
            .iter()
            .find(|r| r.attack.contains("Shuffle") && r.decoder == "svd")
            .unwrap();
        assert_eq!(shuffled_svd.accuracy.mean, 1.0);
        assert_eq!(shuffled_svd.ber.mean, 0.0);
    }

    #[test]
    fn parallel_matches_sequential() {
        let (_dir, manifest) = tiny_manifest();
        let checkpoint = tiny_checkpoint(3);
        let attacks = attack_catalogue(3)[..3].to_vec();
        let config = EmbedConfig::default();
        let a = run_evaluation(&manifest, &config, &checkpoint, &attacks, 1).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool
            .install(|| run_evaluation(&manifest, &config, &checkpoint, &attacks, 1))
            .unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.accuracy, y.accuracy);
            assert_eq!(x.chamfer, y.chamfer);
            assert_eq!(x.psnr, y.psnr);
        }
    }

    #[test]
    fn mismatched_checkpoint_rejected() {
        let (_dir, manifest) = tiny_manifest();
        let checkpoint = tiny_checkpoint(2);
        assert!(matches!(
            run_evaluation(&manifest, &EmbedConfig::default(), &checkpoint, &[], 0),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn ownership_roc_runs() {
        let (_dir, manifest) = tiny_manifest();
        let checkpoint = tiny_checkpoint(3);
        let roc = ownership_roc(&manifest, &EmbedConfig::default(), &checkpoint, 3, 9).unwrap();
        assert!((0.0..=1.0).contains(&roc.auc));
        assert!(roc.points.len() >= 2);
    }

    #[test]
    fn aggregation_matches_hand_computation() {
        let values = [0.5, 1.0, 0.0];
        let stats = MetricStats::from_values(&values);
        assert!((stats.mean - 0.5).abs() < 1e-15);
        // Population std: sqrt(((0)^2 + (0.5)^2 + (0.5)^2) / 3).
        assert!((stats.std - (0.5f64 * 0.5 * 2.0 / 3.0).sqrt()).abs() < 1e-15);
    }
}
