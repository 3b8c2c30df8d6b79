//! Procedural test meshes and dataset layouts.
//!
//! The toolkit is dataset-agnostic; these generators provide deterministic
//! stand-ins so the examples, tests and benchmarks run without any external
//! model corpus. [`write_dataset`] lays generated meshes out in the
//! `class/train/*.off`, `class/test/*.off` structure the manifest builder
//! expects.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{Point, TriangleMesh};
use crate::rng::SplitMix64;

/// Shape families with enough spectral variety to exercise the pipeline.
pub const FAMILIES: [&str; 6] = ["sphere", "box", "cylinder", "torus", "ellipsoid", "blob"];

/// A deterministic mesh from the named family; `seed` perturbs proportions.
pub fn make_mesh(family: &str, seed: u64) -> Result<TriangleMesh> {
    let mut rng = SplitMix64::stream(seed, crate::rng::fnv1a64(family.as_bytes()));
    match family {
        "sphere" => Ok(uv_sphere(rng.uniform_in(0.6, 1.4), 24, 16, |_, _| 1.0)),
        "ellipsoid" => {
            let (a, b, c) = (
                rng.uniform_in(0.5, 1.5),
                rng.uniform_in(0.3, 1.0),
                rng.uniform_in(0.2, 0.8),
            );
            let mut mesh = uv_sphere(1.0, 24, 16, |_, _| 1.0);
            for v in &mut mesh.vertices {
                v[0] *= a;
                v[1] *= b;
                v[2] *= c;
            }
            Ok(mesh)
        }
        "blob" => {
            let bumps = rng.uniform_in(2.0, 5.0).floor();
            let amp = rng.uniform_in(0.08, 0.25);
            let phase = rng.uniform_in(0.0, std::f64::consts::TAU);
            Ok(uv_sphere(1.0, 32, 20, move |theta, phi| {
                1.0 + amp * (bumps * theta + phase).sin() * (bumps * phi).cos()
            }))
        }
        "box" => Ok(box_mesh(
            rng.uniform_in(0.5, 2.0),
            rng.uniform_in(0.4, 1.5),
            rng.uniform_in(0.3, 1.0),
        )),
        "cylinder" => Ok(cylinder(
            rng.uniform_in(0.3, 0.9),
            rng.uniform_in(0.8, 2.2),
            28,
        )),
        "torus" => Ok(torus(
            rng.uniform_in(0.7, 1.2),
            rng.uniform_in(0.15, 0.4),
            28,
            14,
        )),
        other => Err(Error::InvalidConfig(format!(
            "unknown mesh family {other:?}"
        ))),
    }
}

/// Latitude/longitude sphere with a radial modulation function.
fn uv_sphere(
    radius: f64,
    segments: usize,
    rings: usize,
    radial: impl Fn(f64, f64) -> f64,
) -> TriangleMesh {
    let mut vertices: Vec<Point> = Vec::new();
    // rings+1 latitude rows, poles included; each row has `segments` verts.
    for ring in 0..=rings {
        let theta = std::f64::consts::PI * ring as f64 / rings as f64;
        for seg in 0..segments {
            let phi = std::f64::consts::TAU * seg as f64 / segments as f64;
            let r = radius * radial(theta, phi);
            vertices.push([
                r * theta.sin() * phi.cos(),
                r * theta.sin() * phi.sin(),
                r * theta.cos(),
            ]);
        }
    }
    let mut faces = Vec::new();
    let at = |ring: usize, seg: usize| ring * segments + (seg % segments);
    for ring in 0..rings {
        for seg in 0..segments {
            let (a, b) = (at(ring, seg), at(ring, seg + 1));
            let (c, d) = (at(ring + 1, seg), at(ring + 1, seg + 1));
            if ring > 0 {
                faces.push([a, b, d]);
            }
            if ring + 1 < rings {
                faces.push([a, d, c]);
            } else {
                faces.push([a, b, c]);
            }
        }
    }
    TriangleMesh { vertices, faces }
}

fn box_mesh(dx: f64, dy: f64, dz: f64) -> TriangleMesh {
    let (x, y, z) = (dx / 2.0, dy / 2.0, dz / 2.0);
    let vertices = vec![
        [-x, -y, -z],
        [x, -y, -z],
        [x, y, -z],
        [-x, y, -z],
        [-x, -y, z],
        [x, -y, z],
        [x, y, z],
        [-x, y, z],
    ];
    let quads = [
        [0, 3, 2, 1],
        [4, 5, 6, 7],
        [0, 1, 5, 4],
        [2, 3, 7, 6],
        [1, 2, 6, 5],
        [3, 0, 4, 7],
    ];
    let mut faces = Vec::new();
    for q in quads {
        faces.push([q[0], q[1], q[2]]);
        faces.push([q[0], q[2], q[3]]);
    }
    TriangleMesh { vertices, faces }
}

fn cylinder(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let h = height / 2.0;
    let mut vertices: Vec<Point> = Vec::new();
    for seg in 0..segments {
        let phi = std::f64::consts::TAU * seg as f64 / segments as f64;
        vertices.push([radius * phi.cos(), radius * phi.sin(), -h]);
        vertices.push([radius * phi.cos(), radius * phi.sin(), h]);
    }
    let bottom_center = vertices.len();
    vertices.push([0.0, 0.0, -h]);
    let top_center = vertices.len();
    vertices.push([0.0, 0.0, h]);

    let mut faces = Vec::new();
    for seg in 0..segments {
        let a = 2 * seg;
        let b = 2 * ((seg + 1) % segments);
        faces.push([a, b, a + 1]);
        faces.push([b, b + 1, a + 1]);
        faces.push([bottom_center, b, a]);
        faces.push([top_center, a + 1, b + 1]);
    }
    TriangleMesh { vertices, faces }
}

fn torus(major: f64, minor: f64, segments: usize, sides: usize) -> TriangleMesh {
    let mut vertices: Vec<Point> = Vec::new();
    for seg in 0..segments {
        let u = std::f64::consts::TAU * seg as f64 / segments as f64;
        for side in 0..sides {
            let v = std::f64::consts::TAU * side as f64 / sides as f64;
            let r = major + minor * v.cos();
            vertices.push([r * u.cos(), r * u.sin(), minor * v.sin()]);
        }
    }
    let at = |seg: usize, side: usize| (seg % segments) * sides + (side % sides);
    let mut faces = Vec::new();
    for seg in 0..segments {
        for side in 0..sides {
            let (a, b) = (at(seg, side), at(seg + 1, side));
            let (c, d) = (at(seg, side + 1), at(seg + 1, side + 1));
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    TriangleMesh { vertices, faces }
}

/// Encode a mesh as ASCII OFF.
pub fn to_off(mesh: &TriangleMesh) -> String {
    let mut out = String::from("OFF\n");
    out.push_str(&format!("{} {} 0\n", mesh.vertices.len(), mesh.faces.len()));
    for v in &mesh.vertices {
        out.push_str(&format!("{} {} {}\n", v[0], v[1], v[2]));
    }
    for f in &mesh.faces {
        out.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
    }
    out
}

/// Write a generated dataset under `root` in the ModelNet-style layout:
/// one directory per family with `train/` and `test/` OFF files. Returns
/// the number of files written.
pub fn write_dataset(
    root: &Path,
    train_per_family: usize,
    test_per_family: usize,
    seed: u64,
) -> Result<usize> {
    let mut written = 0;
    for family in FAMILIES {
        for (split, count, offset) in [
            ("train", train_per_family, 0u64),
            ("test", test_per_family, 1_000_000u64),
        ] {
            let dir: PathBuf = root.join(family).join(split);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for i in 0..count {
                let mesh = make_mesh(family, seed ^ (offset + i as u64))?;
                let path = dir.join(format!("{family}_{split}_{i:04}.off"));
                fs::write(&path, to_off(&mesh)).map_err(|e| Error::io(&path, e))?;
                written += 1;
            }
        }
    }
    Ok(written)
}
