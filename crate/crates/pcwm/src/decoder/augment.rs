//! Stochastic training-time augmentation.
//!
//! Each of four transforms — Gaussian noise (sigma 0.01), uniform scaling
//! (0.95..1.05), uniform random rotation, and 10% dropout — is included
//! independently with probability one half, applied in seeded random order,
//! and the cloud is re-normalized last. Validation and test inputs are never
//! augmented.

use crate::geometry::{normalize, PointCloud};
use crate::rng::SplitMix64;

const NOISE_SIGMA: f64 = 0.01;
const SCALE_RANGE: (f64, f64) = (0.95, 1.05);
const DROPOUT_FRACTION: f64 = 0.10;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Transform {
    Noise,
    Scale,
    Rotation,
    Dropout,
}

/// Augment a training cloud. Fully determined by `(cloud, seed)`.
pub fn augment(cloud: &PointCloud, seed: u64) -> PointCloud {
    let mut rng = SplitMix64::stream(seed, 0);
    let mut included: Vec<Transform> = [
        Transform::Noise,
        Transform::Scale,
        Transform::Rotation,
        Transform::Dropout,
    ]
    .into_iter()
    .filter(|_| rng.uniform() < 0.5)
    .collect();
    rng.shuffle(&mut included);

    let mut out = cloud.clone();
    for transform in included {
        out = match transform {
            Transform::Noise => PointCloud::new(
                out.points
                    .iter()
                    .map(|p| {
                        [
                            p[0] + NOISE_SIGMA * rng.gaussian(),
                            p[1] + NOISE_SIGMA * rng.gaussian(),
                            p[2] + NOISE_SIGMA * rng.gaussian(),
                        ]
                    })
                    .collect(),
            ),
            Transform::Scale => {
                let s = rng.uniform_in(SCALE_RANGE.0, SCALE_RANGE.1);
                PointCloud::new(
                    out.points
                        .iter()
                        .map(|p| [p[0] * s, p[1] * s, p[2] * s])
                        .collect(),
                )
            }
            Transform::Rotation => {
                // Shoemake's uniform unit quaternion.
                let (u1, u2, u3) = (rng.uniform(), rng.uniform(), rng.uniform());
                let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
                let (s2, c2) = (std::f64::consts::TAU * u2).sin_cos();
                let (s3, c3) = (std::f64::consts::TAU * u3).sin_cos();
                let (x, y, z, w) = (a * s2, a * c2, b * s3, b * c3);
                let m = [
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
                ];
                PointCloud::new(
                    out.points
                        .iter()
                        .map(|p| {
                            [
                                m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
                                m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
                                m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
                            ]
                        })
                        .collect(),
                )
            }
            Transform::Dropout => {
                let n = out.len();
                let remove = ((DROPOUT_FRACTION * n as f64).floor() as usize).min(n.max(1) - 1);
                let mut indices: Vec<usize> = (0..n).collect();
                for i in 0..remove {
                    let j = i + rng.below(n - i);
                    indices.swap(i, j);
                }
                let mut removed = vec![false; n];
                for &i in &indices[..remove] {
                    removed[i] = true;
                }
                PointCloud::new(
                    out.points
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| !removed[*i])
                        .map(|(_, p)| *p)
                        .collect(),
                )
            }
        };
    }

    // Degenerate inputs (all points coincident) pass through unchanged.
    match normalize(&out) {
        Ok((normalized, _)) => normalized,
        Err(_) => cloud.clone(),
    }
}
