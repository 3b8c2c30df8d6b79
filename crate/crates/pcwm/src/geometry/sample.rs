//! Uniform surface sampling of triangle meshes.

use crate::error::{Error, Result};
use crate::geometry::cloud::PointCloud;
use crate::geometry::mesh::TriangleMesh;
use crate::rng::SplitMix64;

/// Draw `count` points uniformly by surface area.
///
/// A triangle is chosen with probability proportional to its area, then a
/// point is placed at `P = (1-sqrt(r1)) A + sqrt(r1)(1-r2) B + sqrt(r1) r2 C`,
/// which is uniform over the triangle. Output is fully determined by
/// `(mesh, count, seed)`.
pub fn sample_surface(mesh: &TriangleMesh, count: usize, seed: u64) -> Result<PointCloud> {
    let cumulative: Vec<f64> = {
        let mut acc = 0.0;
        mesh.faces
            .iter()
            .enumerate()
            .map(|(i, _)| {
                acc += mesh.face_area(i);
                acc
            })
            .collect()
    };
    let total = cumulative.last().copied().unwrap_or(0.0);
    if total <= 0.0 {
        return Err(Error::ZeroAreaMesh);
    }

    let mut rng = SplitMix64::new(seed);
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let target = rng.uniform() * total;
        let face = cumulative.partition_point(|&c| c <= target).min(mesh.faces.len() - 1);
        let [ia, ib, ic] = mesh.faces[face];
        let (a, b, c) = (mesh.vertices[ia], mesh.vertices[ib], mesh.vertices[ic]);
        let s = rng.uniform().sqrt();
        let t = rng.uniform();
        let (wa, wb, wc) = (1.0 - s, s * (1.0 - t), s * t);
        points.push([
            wa * a[0] + wb * b[0] + wc * c[0],
            wa * a[1] + wb * b[1] + wc * c[1],
            wa * a[2] + wb * b[2] + wc * c[2],
        ]);
    }
    Ok(PointCloud::new(points))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_triangle() -> TriangleMesh {
        TriangleMesh {
            vertices: vec![[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            faces: vec![[0, 1, 2]],
        }
    }

    /// Solve for barycentric coordinates in the triangle's plane.
    fn barycentric(p: [f64; 3], a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> [f64; 3] {
        let v0 = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v1 = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let v2 = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
        let dot = |u: [f64; 3], v: [f64; 3]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
        let (d00, d01, d11, d20, d21) =
            (dot(v0, v0), dot(v0, v1), dot(v1, v1), dot(v2, v0), dot(v2, v1));
        let denom = d00 * d11 - d01 * d01;
        let v = (d11 * d20 - d01 * d21) / denom;
        let w = (d00 * d21 - d01 * d20) / denom;
        [1.0 - v - w, v, w]
    }

    #[test]
    fn samples_stay_inside_triangle() {
        let mesh = single_triangle();
        let cloud = sample_surface(&mesh, 100, 7).unwrap();
        assert_eq!(cloud.len(), 100);
        for p in &cloud.points {
            let bc = barycentric(*p, mesh.vertices[0], mesh.vertices[1], mesh.vertices[2]);
            for w in bc {
                assert!(w >= -1e-9, "negative barycentric weight {w}");
            }
            assert!((bc.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn area_weighting_follows_binomial_model() {
        // Two triangles with area ratio 4:1; the larger one should receive a
        // fraction of samples within 3 sigma of 0.8 under a binomial model:
        // n = 10_000, p = 0.8 -> sigma = sqrt(n p (1-p)) = 40.
        let mesh = TriangleMesh {
            vertices: vec![
                [0.0, 0.0, 0.0],
                [4.0, 0.0, 0.0],
                [0.0, 2.0, 0.0],
                [10.0, 0.0, 0.0],
                [11.0, 0.0, 0.0],
                [10.0, 2.0, 0.0],
            ],
            faces: vec![[0, 1, 2], [3, 4, 5]],
        };
        let n = 10_000;
        let cloud = sample_surface(&mesh, n, 123).unwrap();
        let in_large = cloud.points.iter().filter(|p| p[0] < 8.0).count();
        let expected = 0.8 * n as f64;
        let sigma = (n as f64 * 0.8 * 0.2).sqrt();
        assert!(
            (in_large as f64 - expected).abs() <= 3.0 * sigma,
            "large triangle got {in_large} of {n}"
        );
    }

    #[test]
    fn degenerate_mesh_rejected() {
        let mesh = TriangleMesh {
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [2.0, 2.0, 2.0]],
            faces: vec![[0, 1, 2]],
        };
        assert!(matches!(
            sample_surface(&mesh, 10, 0),
            Err(Error::ZeroAreaMesh)
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let mesh = single_triangle();
        let a = sample_surface(&mesh, 64, 99).unwrap();
        let b = sample_surface(&mesh, 64, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_surface(&mesh, 64, 100).unwrap();
        assert_ne!(a, c);
    }
}
