//! Parse a mesh, sample it uniformly by surface area, normalize, and round
//! the cloud through both on-disk formats.
//!
//! Run with: `cargo run --release --example sample_and_normalize`

use pcwm::geometry::{
    normalize, parse_off, read_cloud, sample_surface, write_cloud, CloudFormat,
};
use pcwm::synthetic::{make_mesh, to_off};

fn main() -> pcwm::Result<()> {
    // A deterministic torus stands in for a dataset mesh; any ASCII OFF or
    // PLY file works the same way via `geometry::read_mesh`.
    let mesh = make_mesh("torus", 7)?;
    let off_bytes = to_off(&mesh);
    let parsed = parse_off(off_bytes.as_bytes())?;
    println!(
        "mesh: {} vertices, {} triangles, surface area {:.4}",
        parsed.vertices.len(),
        parsed.faces.len(),
        parsed.total_area()
    );

    let cloud = sample_surface(&parsed, 1024, 42)?;
    let (normalized, record) = normalize(&cloud)?;
    println!(
        "sampled {} points; centroid was ({:.4}, {:.4}, {:.4}), scale {:.4}",
        normalized.len(),
        record.centroid[0],
        record.centroid[1],
        record.centroid[2],
        record.scale
    );
    println!(
        "normalized: max norm {:.12}, centroid norm {:.3e}",
        normalized.max_norm(),
        pcwm::geometry::norm(normalized.centroid())
    );

    let dir = std::env::temp_dir().join("pcwm_sample_example");
    std::fs::create_dir_all(&dir).expect("create example output dir");
    for (name, format) in [
        ("cloud.pcb", CloudFormat::PcbBinary),
        ("cloud.xyz", CloudFormat::XyzAscii),
    ] {
        let path = dir.join(name);
        write_cloud(&normalized, &path, format)?;
        let back = read_cloud(&path)?;
        println!("{}: {} points read back", path.display(), back.len());
    }
    Ok(())
}
