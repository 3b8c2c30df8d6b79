//! Seeded corruption suite for robustness evaluation.
//!
//! Every attack is a pure function of `(cloud, spec)`: the spec's seed fully
//! determines the output, so evaluation runs are reproducible point for
//! point. [`attack_catalogue`] returns the fifteen canonical specs in their
//! standard benchmark order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist2, Point, PointCloud};
use crate::rng::{mix64, SplitMix64};
use crate::spatial::KdTree;

/// One corruption kind with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum AttackKind {
    /// I.i.d. zero-mean Gaussian noise added per coordinate.
    GaussianNoise { sigma: f64 },
    /// Each point replaced by the Gaussian-kernel-weighted mean of its k
    /// nearest neighbors (self included), weight `exp(-d^2 / (2 sigma^2))`.
    GaussianSmoothing { k: usize, sigma: f64 },
    /// Single random scale factor drawn from `U(lo, hi)`.
    IsotropicScale { lo: f64, hi: f64 },
    /// Rotation about the z axis by an angle drawn from `U(0, 2 pi)`.
    RotationFixedAxis {},
    /// Uniform random rotation via a uniformly sampled unit quaternion.
    RotationArbitraryAxis {},
    /// Translation with each component drawn from `U(-max_shift, max_shift)`.
    Translation { max_shift: f64 },
    /// Remove a uniformly chosen `floor(fraction * N)` points.
    Dropout { fraction: f64 },
    /// Uniformly random permutation of point order.
    Shuffle {},
    /// Keep the `ceil(retain * N)` points with smallest projection onto a
    /// random unit direction.
    Crop { retain: f64 },
    /// Independent per-axis scale factors drawn from `U(lo, hi)`.
    AffineDistortion { lo: f64, hi: f64 },
    /// Snap each coordinate to `step * round(c / step)`, half away from zero.
    Quantization { step: f64 },
    /// I.i.d. Gaussian perturbation, small sigma.
    Jitter { sigma: f64 },
    /// Remove a random seed point and its `floor(fraction * N) - 1` nearest
    /// neighbors.
    ChunkRemoval { fraction: f64 },
    /// Gaussian noise followed by dropout.
    Combined { sigma: f64, dropout: f64 },
}

impl AttackKind {
    /// Short stable identifier used in CSV output and file names.
    pub fn id(&self) -> String {
        match self {
            AttackKind::GaussianNoise { sigma } => format!("noise_{sigma}"),
            AttackKind::GaussianSmoothing { .. } => "smoothing".into(),
            AttackKind::IsotropicScale { .. } => "scale".into(),
            AttackKind::RotationFixedAxis {} => "rotation_z".into(),
            AttackKind::RotationArbitraryAxis {} => "rotation_any".into(),
            AttackKind::Translation { .. } => "translation".into(),
            AttackKind::Dropout { fraction } => format!("dropout_{fraction}"),
            AttackKind::Shuffle {} => "shuffle".into(),
            AttackKind::Crop { retain } => format!("crop_{retain}"),
            AttackKind::AffineDistortion { .. } => "affine".into(),
            AttackKind::Quantization { step } => format!("quantization_{step}"),
            AttackKind::Jitter { sigma } => format!("jitter_{sigma}"),
            AttackKind::ChunkRemoval { fraction } => format!("chunk_{fraction}"),
            AttackKind::Combined { .. } => "combined".into(),
        }
    }

    /// Human-readable name for tables and plots.
    pub fn label(&self) -> String {
        match self {
            AttackKind::GaussianNoise { sigma } => format!("Additive Gaussian Noise ({sigma})"),
            AttackKind::GaussianSmoothing { .. } => "Gaussian Smoothing".into(),
            AttackKind::IsotropicScale { .. } => "Random Isotropic Scaling".into(),
            AttackKind::RotationFixedAxis {} => "Random Rotation (z axis)".into(),
            AttackKind::RotationArbitraryAxis {} => "Random Rotation (arbitrary axis)".into(),
            AttackKind::Translation { .. } => "Random Translation".into(),
            AttackKind::Dropout { fraction } => {
                format!("Point Dropout ({:.0}%)", fraction * 100.0)
            }
            AttackKind::Shuffle {} => "Shuffle".into(),
            AttackKind::Crop { retain } => {
                format!("Random Cropping ({:.0}% retention)", retain * 100.0)
            }
            AttackKind::AffineDistortion { .. } => "Affine Distortion".into(),
            AttackKind::Quantization { step } => format!("Quantization (step {step})"),
            AttackKind::Jitter { sigma } => format!("Jittering (sigma {sigma})"),
            AttackKind::ChunkRemoval { fraction } => {
                format!("Chunk Removal ({:.0}%)", fraction * 100.0)
            }
            AttackKind::Combined { sigma, dropout } => {
                format!("Combined Noise & Dropout ({sigma}, {dropout})")
            }
        }
    }
}

/// A fully specified, reproducible corruption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    #[serde(flatten)]
    pub kind: AttackKind,
    pub seed: u64,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, seed: u64) -> AttackSpec {
        AttackSpec { kind, seed }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("attack spec serialization cannot fail")
    }

    pub fn from_json(raw: &str) -> Result<AttackSpec> {
        serde_json::from_str(raw)
            .map_err(|e| Error::MalformedRecord(format!("bad attack spec JSON: {e}")))
    }
}

/// The fifteen canonical attacks in benchmark order. Per-row seeds are
/// derived from `base_seed` so one seed pins the whole suite.
pub fn attack_catalogue(base_seed: u64) -> Vec<AttackSpec> {
    let kinds = vec![
        AttackKind::GaussianNoise { sigma: 0.01 },
        AttackKind::GaussianNoise { sigma: 0.03 },
        AttackKind::GaussianSmoothing { k: 16, sigma: 0.05 },
        AttackKind::IsotropicScale { lo: 0.8, hi: 1.2 },
        AttackKind::RotationFixedAxis {},
        AttackKind::RotationArbitraryAxis {},
        AttackKind::Translation { max_shift: 0.05 },
        AttackKind::Dropout { fraction: 0.10 },
        AttackKind::Shuffle {},
        AttackKind::Crop { retain: 0.70 },
        AttackKind::AffineDistortion { lo: 0.9, hi: 1.1 },
        AttackKind::Quantization { step: 0.01 },
        AttackKind::Jitter { sigma: 0.005 },
        AttackKind::ChunkRemoval { fraction: 0.20 },
        AttackKind::Combined {
            sigma: 0.02,
            dropout: 0.15,
        },
    ];
    kinds
        .into_iter()
        .enumerate()
        .map(|(i, kind)| AttackSpec::new(kind, mix64(base_seed ^ (i as u64).wrapping_mul(0xA5A5))))
        .collect()
}

/// Apply one attack. Identical `(cloud, spec)` pairs give bit-identical
/// output.
pub fn apply_attack(cloud: &PointCloud, spec: &AttackSpec) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut rng = SplitMix64::stream(spec.seed, 0);
    let out = match &spec.kind {
        AttackKind::GaussianNoise { sigma } => add_noise(cloud, *sigma, &mut rng),
        AttackKind::Jitter { sigma } => add_noise(cloud, *sigma, &mut rng),
        AttackKind::GaussianSmoothing { k, sigma } => smooth(cloud, *k, *sigma),
        AttackKind::IsotropicScale { lo, hi } => {
            let s = rng.uniform_in(*lo, *hi);
            map_points(cloud, |p| [p[0] * s, p[1] * s, p[2] * s])
        }
        AttackKind::RotationFixedAxis {} => {
            let theta = rng.uniform_in(0.0, std::f64::consts::TAU);
            let (s, c) = theta.sin_cos();
            map_points(cloud, |p| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]])
        }
        AttackKind::RotationArbitraryAxis {} => {
            let rot = random_rotation(&mut rng);
            map_points(cloud, |p| rotate(rot, p))
        }
        AttackKind::Translation { max_shift } => {
            let t = [
                rng.uniform_in(-max_shift, *max_shift),
                rng.uniform_in(-max_shift, *max_shift),
                rng.uniform_in(-max_shift, *max_shift),
            ];
            map_points(cloud, |p| [p[0] + t[0], p[1] + t[1], p[2] + t[2]])
        }
        AttackKind::Dropout { fraction } => drop_random(cloud, *fraction, &mut rng),
        AttackKind::Shuffle {} => {
            let mut points = cloud.points.clone();
            rng.shuffle(&mut points);
            PointCloud::new(points)
        }
        AttackKind::Crop { retain } => crop(cloud, *retain, &mut rng),
        AttackKind::AffineDistortion { lo, hi } => {
            let s = [
                rng.uniform_in(*lo, *hi),
                rng.uniform_in(*lo, *hi),
                rng.uniform_in(*lo, *hi),
            ];
            map_points(cloud, |p| [p[0] * s[0], p[1] * s[1], p[2] * s[2]])
        }
        AttackKind::Quantization { step } => map_points(cloud, |p| {
            // f64::round is round-half-away-from-zero.
            [
                (p[0] / step).round() * step,
                (p[1] / step).round() * step,
                (p[2] / step).round() * step,
            ]
        }),
        AttackKind::ChunkRemoval { fraction } => chunk_removal(cloud, *fraction, &mut rng),
        AttackKind::Combined { sigma, dropout } => {
            let mut noise_rng = SplitMix64::stream(spec.seed, 1);
            let mut drop_rng = SplitMix64::stream(spec.seed, 2);
            let noisy = add_noise(cloud, *sigma, &mut noise_rng);
            drop_random(&noisy, *dropout, &mut drop_rng)
        }
    };
    if out.is_empty() {
        return Err(Error::EmptyResult);
    }
    Ok(out)
}

fn map_points(cloud: &PointCloud, f: impl Fn(Point) -> Point) -> PointCloud {
    PointCloud::new(cloud.points.iter().map(|&p| f(p)).collect())
}

fn add_noise(cloud: &PointCloud, sigma: f64, rng: &mut SplitMix64) -> PointCloud {
    let points = cloud
        .points
        .iter()
        .map(|p| {
            [
                p[0] + sigma * rng.gaussian(),
                p[1] + sigma * rng.gaussian(),
                p[2] + sigma * rng.gaussian(),
            ]
        })
        .collect();
    PointCloud::new(points)
}

fn smooth(cloud: &PointCloud, k: usize, sigma: f64) -> PointCloud {
    let k = k.min(cloud.len());
    let tree = KdTree::build(&cloud.points);
    let two_sigma2 = 2.0 * sigma * sigma;
    let points = cloud
        .points
        .iter()
        .map(|&p| {
            let mut acc = [0.0; 3];
            let mut total = 0.0;
            for j in tree.knn(p, k) {
                let q = cloud.points[j];
                let w = (-dist2(p, q) / two_sigma2).exp();
                acc[0] += w * q[0];
                acc[1] += w * q[1];
                acc[2] += w * q[2];
                total += w;
            }
            [acc[0] / total, acc[1] / total, acc[2] / total]
        })
        .collect();
    PointCloud::new(points)
}

/// Shoemake's method: uniform unit quaternion -> rotation matrix.
fn random_rotation(rng: &mut SplitMix64) -> [[f64; 3]; 3] {
    let u1 = rng.uniform();
    let u2 = rng.uniform();
    let u3 = rng.uniform();
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (s2, c2) = (std::f64::consts::TAU * u2).sin_cos();
    let (s3, c3) = (std::f64::consts::TAU * u3).sin_cos();
    let (x, y, z, w) = (a * s2, a * c2, b * s3, b * c3);
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
        ],
        [
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
        ],
        [
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

fn rotate(m: [[f64; 3]; 3], p: Point) -> Point {
    [
        m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
        m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
        m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
    ]
}

/// Remove `floor(fraction * N)` uniformly chosen points, keeping survivor
/// order.
fn drop_random(cloud: &PointCloud, fraction: f64, rng: &mut SplitMix64) -> PointCloud {
    let n = cloud.len();
    let remove = ((fraction * n as f64).floor() as usize).min(n);
    // Partial Fisher-Yates over the index set picks the removal subset
    // uniformly.
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..remove {
        let j = i + rng.below(n - i);
        indices.swap(i, j);
    }
    let mut removed = vec![false; n];
    for &i in &indices[..remove] {
        removed[i] = true;
    }
    let points = cloud
        .points
        .iter()
        .enumerate()
        .filter(|(i, _)| !removed[*i])
        .map(|(_, p)| *p)
        .collect();
    PointCloud::new(points)
}

fn crop(cloud: &PointCloud, retain: f64, rng: &mut SplitMix64) -> PointCloud {
    let n = cloud.len();
    let keep = ((retain * n as f64).ceil() as usize).min(n);
    // Uniform direction from a normalized Gaussian triple.
    let d = loop {
        let g = [rng.gaussian(), rng.gaussian(), rng.gaussian()];
        let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if norm > 1e-12 {
            break [g[0] / norm, g[1] / norm, g[2] / norm];
        }
    };
    let mut order: Vec<usize> = (0..n).collect();
    let proj = |i: usize| {
        let p = cloud.points[i];
        p[0] * d[0] + p[1] * d[1] + p[2] * d[2]
    };
    order.sort_by(|&a, &b| proj(a).total_cmp(&proj(b)).then(a.cmp(&b)));
    let mut kept: Vec<usize> = order[..keep].to_vec();
    kept.sort_unstable();
    PointCloud::new(kept.into_iter().map(|i| cloud.points[i]).collect())
}

fn chunk_removal(cloud: &PointCloud, fraction: f64, rng: &mut SplitMix64) -> PointCloud {
    let n = cloud.len();
    let remove = ((fraction * n as f64).floor() as usize).min(n);
    if remove == 0 {
        return cloud.clone();
    }
    let seed_point = rng.below(n);
    let tree = KdTree::build(&cloud.points);
    let victims = tree.knn(cloud.points[seed_point], remove);
    let mut removed = vec![false; n];
    for v in victims {
        removed[v] = true;
    }
    let points = cloud
        .points
        .iter()
        .enumerate()
        .filter(|(i, _)| !removed[*i])
        .map(|(_, p)| *p)
        .collect();
    PointCloud::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dist;
    use crate::rng::SplitMix64;

    fn cloud(n: usize, seed: u64) -> PointCloud {
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
    fn catalogue_matches_benchmark_table() {
        let specs = attack_catalogue(0);
        assert_eq!(specs.len(), 15);
        assert_eq!(specs[0].kind, AttackKind::GaussianNoise { sigma: 0.01 });
        assert!(specs.iter().any(|s| s.kind
            == AttackKind::Combined {
                sigma: 0.02,
                dropout: 0.15
            }));
    }

    #[test]
    fn quantization_example() {
        let spec = AttackSpec::new(AttackKind::Quantization { step: 0.01 }, 0);
        let out = apply_attack(
            &PointCloud::new(vec![[0.004, 0.006, -0.012]]),
            &spec,
        )
        .unwrap();
        let p = out.points[0];
        assert!((p[0] - 0.0).abs() < 1e-12);
        assert!((p[1] - 0.01).abs() < 1e-12);
        assert!((p[2] + 0.01).abs() < 1e-12);
    }

    #[test]
    fn quantization_idempotent() {
        let spec = AttackSpec::new(AttackKind::Quantization { step: 0.01 }, 3);
        let original = cloud(200, 1);
        let once = apply_attack(&original, &spec).unwrap();
        let twice = apply_attack(&once, &spec).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn shuffle_preserves_multiset() {
        let original = cloud(100, 2);
        let spec = AttackSpec::new(AttackKind::Shuffle {}, 9);
        let out = apply_attack(&original, &spec).unwrap();
        let mut a = original.points.clone();
        let mut b = out.points.clone();
        let key = |p: &Point| (p[0].to_bits(), p[1].to_bits(), p[2].to_bits());
        a.sort_by_key(key);
        b.sort_by_key(key);
        assert_eq!(a, b);
        assert_ne!(original, out, "seed 9 must actually permute");
    }

    #[test]
    fn crop_cardinality_and_separation() {
        let original = cloud(1024, 5);
        let spec = AttackSpec::new(AttackKind::Crop { retain: 0.70 }, 11);
        let out = apply_attack(&original, &spec).unwrap();
        assert_eq!(out.len(), 717);

        // Recover the direction the attack drew and verify the half-space
        // property: max projection among kept < min among removed.
        let mut rng = SplitMix64::stream(11, 0);
        let d = {
            let g = [rng.gaussian(), rng.gaussian(), rng.gaussian()];
            let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            [g[0] / n, g[1] / n, g[2] / n]
        };
        let proj = |p: &Point| p[0] * d[0] + p[1] * d[1] + p[2] * d[2];
        let kept: std::collections::HashSet<_> = out
            .points
            .iter()
            .map(|p| (p[0].to_bits(), p[1].to_bits(), p[2].to_bits()))
            .collect();
        let mut kept_max = f64::NEG_INFINITY;
        let mut removed_min = f64::INFINITY;
        for p in &original.points {
            let x = proj(p);
            if kept.contains(&(p[0].to_bits(), p[1].to_bits(), p[2].to_bits())) {
                kept_max = kept_max.max(x);
            } else {
                removed_min = removed_min.min(x);
            }
        }
        assert!(kept_max <= removed_min);
    }

    #[test]
    fn cardinalities() {
        let original = cloud(1024, 6);
        let cases = [
            (AttackKind::GaussianNoise { sigma: 0.01 }, 1024),
            (AttackKind::GaussianSmoothing { k: 16, sigma: 0.05 }, 1024),
            (AttackKind::IsotropicScale { lo: 0.8, hi: 1.2 }, 1024),
            (AttackKind::RotationFixedAxis {}, 1024),
            (AttackKind::RotationArbitraryAxis {}, 1024),
            (AttackKind::Translation { max_shift: 0.05 }, 1024),
            (AttackKind::Dropout { fraction: 0.10 }, 922),
            (AttackKind::Shuffle {}, 1024),
            (AttackKind::Crop { retain: 0.70 }, 717),
            (AttackKind::AffineDistortion { lo: 0.9, hi: 1.1 }, 1024),
            (AttackKind::Quantization { step: 0.01 }, 1024),
            (AttackKind::Jitter { sigma: 0.005 }, 1024),
            (AttackKind::ChunkRemoval { fraction: 0.20 }, 820),
            (
                AttackKind::Combined {
                    sigma: 0.02,
                    dropout: 0.15,
                },
                871,
            ),
        ];
        for (kind, expected) in cases {
            let out = apply_attack(&original, &AttackSpec::new(kind.clone(), 42)).unwrap();
            assert_eq!(out.len(), expected, "{kind:?}");
        }
    }

    #[test]
    fn determinism() {
        let original = cloud(256, 7);
        for spec in attack_catalogue(77) {
            let a = apply_attack(&original, &spec).unwrap();
            let b = apply_attack(&original, &spec).unwrap();
            assert_eq!(a, b, "{:?}", spec.kind);
        }
    }

    #[test]
    fn isometries_preserve_pairwise_distances() {
        let original = cloud(64, 8);
        for kind in [
            AttackKind::RotationFixedAxis {},
            AttackKind::RotationArbitraryAxis {},
            AttackKind::Translation { max_shift: 0.05 },
        ] {
            let out = apply_attack(&original, &AttackSpec::new(kind.clone(), 13)).unwrap();
            for i in 0..original.len() {
                for j in (i + 1)..original.len() {
                    let before = dist(original.points[i], original.points[j]);
                    let after = dist(out.points[i], out.points[j]);
                    assert!(
                        (before - after).abs() <= 1e-9 * before.max(1e-12),
                        "{kind:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn smoothing_stays_in_neighborhood_hull() {
        let original = cloud(128, 10);
        let spec = AttackSpec::new(AttackKind::GaussianSmoothing { k: 8, sigma: 0.05 }, 1);
        let out = apply_attack(&original, &spec).unwrap();
        let tree = KdTree::build(&original.points);
        for (i, p) in out.points.iter().enumerate() {
            // Positive-weight average lies in the hull; the bounding box of
            // the neighborhood is a cheap necessary check.
            let neighbors = tree.knn(original.points[i], 8);
            for axis in 0..3 {
                let lo = neighbors
                    .iter()
                    .map(|&j| original.points[j][axis])
                    .fold(f64::INFINITY, f64::min);
                let hi = neighbors
                    .iter()
                    .map(|&j| original.points[j][axis])
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(p[axis] >= lo - 1e-12 && p[axis] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn empty_result_rejected() {
        let tiny = PointCloud::new(vec![[0.0, 0.0, 0.0]]);
        let spec = AttackSpec::new(AttackKind::ChunkRemoval { fraction: 1.0 }, 0);
        assert!(matches!(apply_attack(&tiny, &spec), Err(Error::EmptyResult)));
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = AttackSpec::new(AttackKind::GaussianNoise { sigma: 0.01 }, 7);
        let json = spec.to_json();
        assert!(json.contains("\"kind\""));
        assert!(json.contains("gaussian_noise"));
        assert_eq!(AttackSpec::from_json(&json).unwrap(), spec);

        let literal = r#"{"kind":"crop","params":{"retain":0.7},"seed":3}"#;
        let parsed = AttackSpec::from_json(literal).unwrap();
        assert_eq!(parsed.kind, AttackKind::Crop { retain: 0.7 });
    }
}
