//! Meshes, point clouds, sampling, normalization and cloud I/O.

mod cloud;
mod io;
mod mesh;
mod sample;

pub use cloud::{dist, dist2, norm, normalize, NormalizationRecord, Point, PointCloud};
pub use io::{decode_cloud, encode_cloud, read_cloud, write_cloud, CloudFormat};
pub use mesh::{parse_off, parse_ply, TriangleMesh};
pub use sample::sample_surface;

use crate::error::{Error, Result};
use std::path::Path;

/// Parse a mesh file, dispatching on extension (`.off` or `.ply`).
pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("ply") => parse_ply(&raw),
        _ => parse_off(&raw),
    }
}
