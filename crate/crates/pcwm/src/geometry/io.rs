//! Point-cloud file formats.
//!
//! Two formats are supported:
//! - `PCB` binary: magic `PCB1`, u32 little-endian point count, then
//!   `count * 3` little-endian f64 coordinates. Round-trips bit-exactly.
//! - `XYZ` ASCII: one `x y z` triple per line, printed with 9 significant
//!   digits. Round-trips within the printed precision.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::cloud::PointCloud;

const PCB_MAGIC: &[u8; 4] = b"PCB1";

/// On-disk cloud encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    PcbBinary,
    XyzAscii,
}

impl CloudFormat {
    /// Pick a format from a file extension; `.xyz` means ASCII, anything
    /// else the binary container.
    pub fn from_path(path: &Path) -> CloudFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("xyz") => CloudFormat::XyzAscii,
            _ => CloudFormat::PcbBinary,
        }
    }
}

/// Format one coordinate with 9 significant digits, `%.9g`-style.
fn fmt_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (8 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn encode_cloud(cloud: &PointCloud, format: CloudFormat) -> Vec<u8> {
    match format {
        CloudFormat::PcbBinary => {
            let mut out = Vec::with_capacity(8 + cloud.len() * 24);
            out.extend_from_slice(PCB_MAGIC);
            out.extend_from_slice(&(cloud.len() as u32).to_le_bytes());
            for p in &cloud.points {
                for c in p {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
            out
        }
        CloudFormat::XyzAscii => {
            let mut out = String::new();
            for p in &cloud.points {
                out.push_str(&fmt_sig9(p[0]));
                out.push(' ');
                out.push_str(&fmt_sig9(p[1]));
                out.push(' ');
                out.push_str(&fmt_sig9(p[2]));
                out.push('\n');
            }
            out.into_bytes()
        }
    }
}

pub fn decode_cloud(raw: &[u8]) -> Result<PointCloud> {
    if raw.starts_with(PCB_MAGIC) {
        decode_pcb(raw)
    } else {
        decode_xyz(raw)
    }
}

fn decode_pcb(raw: &[u8]) -> Result<PointCloud> {
    if raw.len() < 8 {
        return Err(Error::MalformedRecord("truncated PCB header".into()));
    }
    let n = u32::from_le_bytes([raw[4], raw[5], raw[6], raw[7]]) as usize;
    let body = &raw[8..];
    if body.len() != n * 24 {
        return Err(Error::MalformedRecord(format!(
            "PCB payload is {} bytes, expected {}",
            body.len(),
            n * 24
        )));
    }
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let mut p = [0.0; 3];
        for (k, slot) in p.iter_mut().enumerate() {
            let at = i * 24 + k * 8;
            *slot = f64::from_le_bytes(body[at..at + 8].try_into().unwrap());
        }
        points.push(p);
    }
    Ok(PointCloud::new(points))
}

fn decode_xyz(raw: &[u8]) -> Result<PointCloud> {
    let text = std::str::from_utf8(raw)
        .map_err(|_| Error::MalformedRecord("XYZ file is not UTF-8".into()))?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut coords = [0.0; 3];
        let mut fields = line.split_whitespace();
        for slot in &mut coords {
            *slot = fields
                .next()
                .and_then(|f| f.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::MalformedRecord(format!("bad XYZ record on line {}", lineno + 1))
                })?;
        }
        if fields.next().is_some() {
            return Err(Error::MalformedRecord(format!(
                "trailing fields on line {}",
                lineno + 1
            )));
        }
        points.push(coords);
    }
    Ok(PointCloud::new(points))
}

pub fn write_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    fs::write(path, encode_cloud(cloud, format)).map_err(|e| Error::io(path, e))
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cloud(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud() -> PointCloud {
        PointCloud::new(vec![
            [0.1, 0.2, 0.3],
            [-1.5e-7, 123.456, -0.5],
            [1.0 / 3.0, -2.0 / 7.0, 0.0],
        ])
    }

    #[test]
    fn pcb_roundtrip_bit_exact() {
        let original = cloud();
        let decoded = decode_cloud(&encode_cloud(&original, CloudFormat::PcbBinary)).unwrap();
        assert_eq!(original, decoded);
    }

    #[test]
    fn xyz_parse_line() {
        let decoded = decode_cloud(b"0.1 0.2 0.3\n").unwrap();
        assert_eq!(decoded.points, vec![[0.1, 0.2, 0.3]]);
    }

    #[test]
    fn xyz_roundtrip_within_printed_precision() {
        let original = cloud();
        let decoded = decode_cloud(&encode_cloud(&original, CloudFormat::XyzAscii)).unwrap();
        for (a, b) in original.points.iter().zip(decoded.points.iter()) {
            for k in 0..3 {
                let scale = a[k].abs().max(1e-30);
                assert!((a[k] - b[k]).abs() / scale < 1e-8, "{} vs {}", a[k], b[k]);
            }
        }
    }

    #[test]
    fn truncated_pcb_rejected() {
        let mut bytes = encode_cloud(&cloud(), CloudFormat::PcbBinary);
        bytes.truncate(bytes.len() - 5);
        assert!(matches!(
            decode_cloud(&bytes),
            Err(Error::MalformedRecord(_))
        ));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pcb");
        write_cloud(&cloud(), &path, CloudFormat::PcbBinary).unwrap();
        assert_eq!(read_cloud(&path).unwrap(), cloud());
    }
}
