//! Watermark-recovery and geometric-fidelity metrics.

use crate::error::{Error, Result};
use crate::geometry::{dist2, PointCloud};
use crate::spatial::KdTree;
use crate::watermark::Watermark;

/// PSNR values are capped here so lossless comparisons stay finite in
/// aggregates.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Squared diameter bound of a unit-max-norm cloud.
const PSNR_PEAK: f64 = 2.0;

/// Per-cloud metric record; `ber == 1 - accuracy` by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample {
    pub accuracy: f64,
    pub ber: f64,
    pub iou: f64,
    pub chamfer: f64,
    pub psnr: f64,
}

impl MetricSample {
    /// Assemble the record from ground-truth and decoded bits plus the two
    /// geometry snapshots (pre-attack watermarked vs attacked).
    pub fn compute(
        truth: &Watermark,
        decoded: &Watermark,
        reference_cloud: &PointCloud,
        attacked_cloud: &PointCloud,
    ) -> Result<MetricSample> {
        let accuracy = bit_accuracy(truth, decoded)?;
        Ok(MetricSample {
            accuracy,
            ber: 1.0 - accuracy,
            iou: iou_bits(truth, decoded)?,
            chamfer: chamfer(reference_cloud, attacked_cloud)?,
            psnr: psnr(reference_cloud, attacked_cloud)?,
        })
    }
}

/// Fraction of positions where the two payloads agree.
pub fn bit_accuracy(w: &Watermark, w_hat: &Watermark) -> Result<f64> {
    if w.len() != w_hat.len() {
        return Err(Error::LengthMismatch {
            a: w.len(),
            b: w_hat.len(),
        });
    }
    let agree = w
        .bits()
        .iter()
        .zip(w_hat.bits())
        .filter(|(a, b)| a == b)
        .count();
    Ok(agree as f64 / w.len() as f64)
}

/// Jaccard overlap of the 1-bit position sets; 1.0 when the union is empty.
pub fn iou_bits(w: &Watermark, w_hat: &Watermark) -> Result<f64> {
    if w.len() != w_hat.len() {
        return Err(Error::LengthMismatch {
            a: w.len(),
            b: w_hat.len(),
        });
    }
    let mut intersection = 0usize;
    let mut union = 0usize;
    for (a, b) in w.bits().iter().zip(w_hat.bits()) {
        if *a == 1 && *b == 1 {
            intersection += 1;
        }
        if *a == 1 || *b == 1 {
            union += 1;
        }
    }
    Ok(if union == 0 {
        1.0
    } else {
        intersection as f64 / union as f64
    })
}

/// Symmetric Chamfer distance: the sum of the two directed mean
/// nearest-neighbor (non-squared) distances.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(directed_mean_nn(a, b) + directed_mean_nn(b, a))
}

fn directed_mean_nn(from: &PointCloud, to: &PointCloud) -> f64 {
    let tree = KdTree::build(&to.points);
    let total: f64 = from
        .points
        .iter()
        .map(|&p| tree.nearest(p).expect("non-empty tree").1.sqrt())
        .sum();
    total / from.len() as f64
}

/// `10 log10(peak^2 / MSE)` with peak 2.0.
///
/// Correspondence is index-wise when the clouds have equal counts (so
/// reordering attacks register as heavy distortion) and nearest-neighbor
/// from `attacked` into `original` otherwise. Capped at [`PSNR_CAP_DB`].
pub fn psnr(original: &PointCloud, attacked: &PointCloud) -> Result<f64> {
    if original.is_empty() || attacked.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mse = if original.len() == attacked.len() {
        original
            .points
            .iter()
            .zip(&attacked.points)
            .map(|(a, b)| dist2(*a, *b))
            .sum::<f64>()
            / original.len() as f64
    } else {
        let tree = KdTree::build(&original.points);
        attacked
            .points
            .iter()
            .map(|&p| tree.nearest(p).expect("non-empty tree").1)
            .sum::<f64>()
            / attacked.len() as f64
    };
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (PSNR_PEAK * PSNR_PEAK / mse).log10()).min(PSNR_CAP_DB))
}

/// Rank-statistic AUC (Mann-Whitney): `P(pos > neg) + 0.5 P(pos == neg)`.
pub fn roc_auc(positive_scores: &[f64], negative_scores: &[f64]) -> Result<f64> {
    if positive_scores.is_empty() || negative_scores.is_empty() {
        return Err(Error::EmptyScoreSet);
    }
    // Sort-and-rank rather than the quadratic double loop; ties share the
    // midrank exactly, which reproduces the 1/2 credit of the definition.
    let mut all: Vec<(f64, bool)> = positive_scores
        .iter()
        .map(|&s| (s, true))
        .chain(negative_scores.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // Ranks are 1-based; everything in [i, j) shares the midrank.
        let midrank = (i + 1 + j) as f64 / 2.0;
        for item in &all[i..j] {
            if item.1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let np = positive_scores.len() as f64;
    let nn = negative_scores.len() as f64;
    let u = rank_sum_pos - np * (np + 1.0) / 2.0;
    Ok(u / (np * nn))
}

/// ROC curve points as (threshold, tpr, fpr), thresholds descending from
/// above the maximum score; classification rule is `score >= threshold`.
pub fn roc_points(positive_scores: &[f64], negative_scores: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    if positive_scores.is_empty() || negative_scores.is_empty() {
        return Err(Error::EmptyScoreSet);
    }
    let mut thresholds: Vec<f64> = positive_scores
        .iter()
        .chain(negative_scores)
        .copied()
        .collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let np = positive_scores.len() as f64;
    let nn = negative_scores.len() as f64;
    let mut points = vec![(f64::INFINITY, 0.0, 0.0)];
    for t in thresholds {
        let tpr = positive_scores.iter().filter(|&&s| s >= t).count() as f64 / np;
        let fpr = negative_scores.iter().filter(|&&s| s >= t).count() as f64 / nn;
        points.push((t, tpr, fpr));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn wm(s: &str) -> Watermark {
        Watermark::parse(s).unwrap()
    }

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = SplitMix64::new(seed);
        PointCloud::new(
            (0..n)
                .map(|_| {
                    [
                        rng.uniform_in(-1.0, 1.0),
                        rng.uniform_in(-1.0, 1.0),
                        rng.uniform_in(-1.0, 1.0),
                    ]
                })
                .collect(),
        )
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(bit_accuracy(&wm("101"), &wm("101")).unwrap(), 1.0);
        let third = bit_accuracy(&wm("111"), &wm("100")).unwrap();
        assert!((third - 1.0 / 3.0).abs() < 1e-15);
        assert!(bit_accuracy(&wm("10"), &wm("101")).is_err());
    }

    #[test]
    fn accuracy_plus_ber_is_one() {
        let sample = MetricSample::compute(
            &wm("1011"),
            &wm("1100"),
            &random_cloud(8, 1),
            &random_cloud(8, 2),
        )
        .unwrap();
        assert_eq!(sample.accuracy + sample.ber, 1.0);
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou_bits(&wm("101"), &wm("100")).unwrap(), 0.5);
        assert_eq!(iou_bits(&wm("000"), &wm("000")).unwrap(), 1.0);
        // iou == 1 iff the 1-bit sets coincide.
        assert_eq!(iou_bits(&wm("110"), &wm("110")).unwrap(), 1.0);
        assert!(iou_bits(&wm("110"), &wm("111")).unwrap() < 1.0);
    }

    #[test]
    fn chamfer_examples() {
        let a = random_cloud(32, 3);
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);

        let single_a = PointCloud::new(vec![[0.0, 0.0, 0.0]]);
        let single_b = PointCloud::new(vec![[1.0, 0.0, 0.0]]);
        assert!((chamfer(&single_a, &single_b).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn chamfer_symmetric_exactly() {
        let a = random_cloud(60, 4);
        let b = random_cloud(45, 5);
        assert_eq!(chamfer(&a, &b).unwrap(), chamfer(&b, &a).unwrap());
    }

    #[test]
    fn chamfer_matches_brute_force() {
        for seed in 0..10 {
            let a = random_cloud(50, seed * 2 + 100);
            let b = random_cloud(40, seed * 2 + 101);
            let brute = {
                let directed = |x: &PointCloud, y: &PointCloud| {
                    x.points
                        .iter()
                        .map(|&p| {
                            y.points
                                .iter()
                                .map(|&q| dist2(p, q).sqrt())
                                .fold(f64::INFINITY, f64::min)
                        })
                        .sum::<f64>()
                        / x.len() as f64
                };
                directed(&a, &b) + directed(&b, &a)
            };
            let fast = chamfer(&a, &b).unwrap();
            assert!((fast - brute).abs() < 1e-12, "{fast} vs {brute}");
        }
    }

    #[test]
    fn chamfer_rigid_invariance() {
        let a = random_cloud(40, 6);
        let b = random_cloud(30, 7);
        let before = chamfer(&a, &b).unwrap();
        let theta: f64 = 0.7;
        let (s, c) = theta.sin_cos();
        let transform = |cloud: &PointCloud| {
            PointCloud::new(
                cloud
                    .points
                    .iter()
                    .map(|p| [c * p[0] - s * p[1] + 0.3, s * p[0] + c * p[1] - 0.1, p[2] + 0.9])
                    .collect(),
            )
        };
        let after = chamfer(&transform(&a), &transform(&b)).unwrap();
        assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn psnr_examples() {
        let a = random_cloud(16, 8);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);

        let orig = PointCloud::new(vec![[0.0, 0.0, 0.0]]);
        let moved = PointCloud::new(vec![[0.2, 0.0, 0.0]]);
        let db = psnr(&orig, &moved).unwrap();
        assert!((db - 20.0).abs() < 1e-12, "got {db}");
    }

    #[test]
    fn psnr_decreases_with_noise() {
        let base = random_cloud(256, 9);
        let mut last = f64::INFINITY;
        for (i, sigma) in [0.001, 0.005, 0.02, 0.08].iter().enumerate() {
            let mut rng = SplitMix64::new(50 + i as u64);
            let noisy = PointCloud::new(
                base.points
                    .iter()
                    .map(|p| {
                        [
                            p[0] + sigma * rng.gaussian(),
                            p[1] + sigma * rng.gaussian(),
                            p[2] + sigma * rng.gaussian(),
                        ]
                    })
                    .collect(),
            );
            let db = psnr(&base, &noisy).unwrap();
            assert!(db < last, "sigma {sigma}: {db} !< {last}");
            last = db;
        }
    }

    #[test]
    fn roc_auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8], &[0.3, 0.4]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5], &[0.5]).unwrap(), 0.5);
        // Enumerated: pairs (0.9,0.5) (0.9,0.1) (0.4,0.1) win, (0.4,0.5)
        // loses -> 3/4.
        assert_eq!(roc_auc(&[0.9, 0.4], &[0.5, 0.1]).unwrap(), 0.75);
    }

    #[test]
    fn roc_auc_complement() {
        let pos = [0.9, 0.7, 0.7, 0.2];
        let neg = [0.8, 0.7, 0.1];
        let forward = roc_auc(&pos, &neg).unwrap();
        let backward = roc_auc(&neg, &pos).unwrap();
        assert_eq!(forward + backward, 1.0);
    }

    #[test]
    fn roc_auc_matches_pair_enumeration() {
        let mut rng = SplitMix64::new(31);
        let pos: Vec<f64> = (0..37).map(|_| rng.uniform()).collect();
        let neg: Vec<f64> = (0..23).map(|_| (rng.uniform() * 8.0).round() / 8.0).collect();
        let mut score = 0.0;
        for &p in &pos {
            for &n in &neg {
                if p > n {
                    score += 1.0;
                } else if p == n {
                    score += 0.5;
                }
            }
        }
        let want = score / (pos.len() * neg.len()) as f64;
        let got = roc_auc(&pos, &neg).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn roc_points_monotone() {
        let pos = [0.9, 0.6, 0.6, 0.3];
        let neg = [0.7, 0.4, 0.2];
        let points = roc_points(&pos, &neg).unwrap();
        assert_eq!(points[0], (f64::INFINITY, 0.0, 0.0));
        let last = points.last().unwrap();
        assert_eq!((last.1, last.2), (1.0, 1.0));
        for w in points.windows(2) {
            assert!(w[1].1 >= w[0].1 && w[1].2 >= w[0].2);
        }
    }

    #[test]
    fn empty_scores_rejected() {
        assert!(matches!(roc_auc(&[], &[0.1]), Err(Error::EmptyScoreSet)));
        assert!(matches!(roc_points(&[0.1], &[]), Err(Error::EmptyScoreSet)));
    }
}
