//! Dataset manifests: disjoint train/test splits with deterministic
//! per-file watermark assignment.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{normalize, read_mesh, sample_surface, PointCloud};
use crate::rng::{fnv1a64, mix64};
use crate::watermark::Watermark;

/// One usable dataset file.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub path: PathBuf,
    /// Path relative to the dataset root; the stable identity used for
    /// hashing.
    pub relative: String,
    pub watermark: Watermark,
}

/// Disjoint train/test file lists with assigned payloads.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub train: Vec<ManifestEntry>,
    pub test: Vec<ManifestEntry>,
    pub n_points: usize,
    pub n_bits: usize,
    pub seed: u64,
    /// How many files were assigned each of the 2^n patterns.
    pub pattern_counts: Vec<usize>,
    /// Chi-square statistic of the assignment balance (reported, never an
    /// error).
    pub chi_square: f64,
    /// Files excluded because parsing or sampling failed, with reasons.
    pub skipped: Vec<(String, String)>,
}

impl DatasetManifest {
    pub fn summary(&self) -> String {
        format!(
            "{} train / {} test usable files ({} skipped); pattern counts {:?}, chi-square {:.3}",
            self.train.len(),
            self.test.len(),
            self.skipped.len(),
            self.pattern_counts,
            self.chi_square
        )
    }
}

/// Deterministic pattern for a file: low bits of the mixed path hash.
fn assign_watermark(relative: &str, seed: u64, n_bits: usize) -> Watermark {
    let mixed = mix64(fnv1a64(relative.as_bytes()) ^ seed);
    Watermark::from_index(mixed, n_bits).expect("n_bits >= 1")
}

/// Sampling seed for a file, independent of directory iteration order.
pub fn sampling_seed(relative: &str, manifest_seed: u64) -> u64 {
    mix64(fnv1a64(relative.as_bytes()).wrapping_add(manifest_seed))
}

/// Parse, sample and normalize one manifest entry.
pub fn load_cloud(entry: &ManifestEntry, n_points: usize, manifest_seed: u64) -> Result<PointCloud> {
    let mesh = read_mesh(&entry.path)?;
    let cloud = sample_surface(&mesh, n_points, sampling_seed(&entry.relative, manifest_seed))?;
    Ok(normalize(&cloud)?.0)
}

fn is_mesh_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("off") | Some("ply")
    )
}

/// Collect `<class>/<split>/*.off|ply` files under `root`, sorted for
/// determinism.
fn collect_split(root: &Path, split: &str) -> Result<Vec<(PathBuf, String)>> {
    let mut files = Vec::new();
    let classes = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    for class in classes {
        let class = class.map_err(|e| Error::io(root, e))?.path();
        if !class.is_dir() {
            continue;
        }
        let split_dir = class.join(split);
        if !split_dir.is_dir() {
            continue;
        }
        let entries = std::fs::read_dir(&split_dir).map_err(|e| Error::io(&split_dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&split_dir, e))?.path();
            if path.is_file() && is_mesh_file(&path) {
                let relative = path
                    .strip_prefix(root)
                    .expect("path under root")
                    .to_string_lossy()
                    .replace('\\', "/");
                files.push((path, relative));
            }
        }
    }
    files.sort_by(|a, b| a.1.cmp(&b.1));
    Ok(files)
}

/// Build a manifest from a ModelNet-style tree (`class/train/*.off`,
/// `class/test/*.off`). A single mesh file is also accepted and becomes a
/// one-entry test split. Every candidate is parsed and sampled once;
/// failures are excluded and logged in `skipped`.
pub fn build_manifest(
    root: &Path,
    n_points: usize,
    n_bits: usize,
    seed: u64,
) -> Result<DatasetManifest> {
    let (train_files, test_files) = if root.is_file() {
        let relative = root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| root.display().to_string());
        (Vec::new(), vec![(root.to_path_buf(), relative)])
    } else {
        (collect_split(root, "train")?, collect_split(root, "test")?)
    };

    // Programmatic disjointness check, mirroring the zero-overlap guarantee.
    let train_set: BTreeSet<&String> = train_files.iter().map(|(_, r)| r).collect();
    if let Some((_, overlap)) = test_files.iter().find(|(_, r)| train_set.contains(r)) {
        return Err(Error::OverlapDetected(overlap.clone()));
    }

    let mut skipped = Vec::new();
    let mut validate = |files: Vec<(PathBuf, String)>| -> Vec<ManifestEntry> {
        files
            .into_iter()
            .filter_map(|(path, relative)| {
                let entry = ManifestEntry {
                    watermark: assign_watermark(&relative, seed, n_bits),
                    path,
                    relative,
                };
                match load_cloud(&entry, n_points, seed) {
                    Ok(_) => Some(entry),
                    Err(e) => {
                        skipped.push((entry.relative.clone(), e.to_string()));
                        None
                    }
                }
            })
            .collect()
    };
    let train = validate(train_files);
    let test = validate(test_files);

    if train.is_empty() && test.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut pattern_counts = vec![0usize; 1 << n_bits.min(16)];
    for entry in train.iter().chain(&test) {
        let mut index = 0usize;
        for (bit, &value) in entry.watermark.bits().iter().enumerate() {
            index |= (value as usize) << bit;
        }
        pattern_counts[index] += 1;
    }
    let total: usize = pattern_counts.iter().sum();
    let expected = total as f64 / pattern_counts.len() as f64;
    let chi_square = pattern_counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();

    Ok(DatasetManifest {
        train,
        test,
        n_points,
        n_bits,
        seed,
        pattern_counts,
        chi_square,
        skipped,
    })
}
