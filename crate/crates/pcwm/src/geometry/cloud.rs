//! Point clouds and normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 3D point. Plain array so clouds stay contiguous in memory.
pub type Point = [f64; 3];

/// An ordered list of 3D points.
///
/// The order is significant: it is an attack surface (shuffling changes it)
/// even though the watermark pipeline re-sorts before doing anything
/// order-sensitive.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Centroid of the cloud.
    ///
    /// Each axis is summed over values sorted ascending, so the result does
    /// not depend on point order; shuffled clouds renormalize to bit-identical
    /// coordinates.
    pub fn centroid(&self) -> Point {
        let n = self.points.len().max(1) as f64;
        let mut c = [0.0; 3];
        let mut axis = vec![0.0f64; self.points.len()];
        for (k, slot) in c.iter_mut().enumerate() {
            for (i, p) in self.points.iter().enumerate() {
                axis[i] = p[k];
            }
            axis.sort_unstable_by(f64::total_cmp);
            *slot = axis.iter().sum::<f64>() / n;
        }
        c
    }

    /// Largest Euclidean norm over points.
    pub fn max_norm(&self) -> f64 {
        self.points
            .iter()
            .map(|p| norm(*p))
            .fold(0.0f64, f64::max)
    }

    /// True when the centroid is within `tol` of the origin and the maximum
    /// norm is within `tol` of one.
    pub fn is_normalized(&self, tol: f64) -> bool {
        norm(self.centroid()) <= tol && (self.max_norm() - 1.0).abs() <= tol
    }
}

/// What `normalize` did, sufficient to invert it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub centroid: Point,
    /// Maximum Euclidean norm before scaling; strictly positive.
    pub scale: f64,
}

impl NormalizationRecord {
    /// Map a normalized cloud back to its original frame.
    pub fn invert(&self, cloud: &PointCloud) -> PointCloud {
        let points = cloud
            .points
            .iter()
            .map(|p| {
                [
                    p[0] * self.scale + self.centroid[0],
                    p[1] * self.scale + self.centroid[1],
                    p[2] * self.scale + self.centroid[2],
                ]
            })
            .collect();
        PointCloud::new(points)
    }
}

#[inline]
pub fn norm(p: Point) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

#[inline]
pub fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    dist2(a, b).sqrt()
}

/// Center a cloud on its mean and scale it to unit maximal norm.
pub fn normalize(cloud: &PointCloud) -> Result<(PointCloud, NormalizationRecord)> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let c = cloud.centroid();
    let centered: Vec<Point> = cloud
        .points
        .iter()
        .map(|p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]])
        .collect();
    let scale = centered.iter().map(|p| norm(*p)).fold(0.0f64, f64::max);
    if scale <= 0.0 {
        return Err(Error::DegenerateCloud);
    }
    let points = centered
        .iter()
        .map(|p| [p[0] / scale, p[1] / scale, p[2] / scale])
        .collect();
    Ok((
        PointCloud::new(points),
        NormalizationRecord { centroid: c, scale },
    ))
}
