//! Block-SVD watermark embedding and analytic extraction.
//!
//! The cloud is sorted lexicographically, split into `n` contiguous index
//! blocks, and each block's dominant singular value is shifted to encode one
//! bit. Two encodings are supported:
//!
//! - [`Mode::Reference`] (default): bit 1 shifts the dominant singular value
//!   by `alpha`, bit 0 leaves it alone; the key stores the original values
//!   (semi-blind side information) and decoding thresholds the normalized
//!   difference at 0.5.
//! - [`Mode::Qim`]: quantization index modulation; the dominant singular
//!   value is snapped to `alpha * (floor(s/alpha) + 0.25 + 0.5 b)` and
//!   decoding thresholds its fractional part, with no side information.
//!
//! Extraction always re-centers and rescales the cloud, re-sorts it, and
//! recomputes block spectra, so it is exactly invariant to point shuffling
//! and to similarity transforms. Because the rank-1 block updates perturb
//! the centroid and maximal norm, embedding runs a verify/re-embed loop
//! until the clean round trip is exact.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize, Point, PointCloud};

/// An n-bit payload, each element 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Watermark {
    bits: Vec<u8>,
}

impl Watermark {
    pub fn new(bits: Vec<u8>) -> Result<Watermark> {
        if bits.is_empty() {
            return Err(Error::InvalidConfig("watermark needs at least one bit".into()));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidConfig("watermark bits must be 0 or 1".into()));
        }
        Ok(Watermark { bits })
    }

    /// Parse a string of `0`/`1` characters, e.g. `"101"`.
    pub fn parse(s: &str) -> Result<Watermark> {
        let bits: Result<Vec<u8>> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::InvalidConfig(format!(
                    "invalid watermark character {other:?}"
                ))),
            })
            .collect();
        Watermark::new(bits?)
    }

    /// The low `n` bits of `value`, bit i of the payload taken from bit i of
    /// `value`.
    pub fn from_index(value: u64, n: usize) -> Result<Watermark> {
        Watermark::new((0..n).map(|i| ((value >> i) & 1) as u8).collect())
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

impl fmt::Display for Watermark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Embedding mode; see the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Reference,
    Qim,
}

/// Everything extraction needs.
///
/// Serialized as JSON: `{"mode": "reference"|"qim", "alpha": number,
/// "n_bits": int, "reference_sigmas": [number]|null,
/// "normalized_embedding": bool}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedKey {
    pub mode: Mode,
    pub alpha: f64,
    pub n_bits: usize,
    pub reference_sigmas: Option<Vec<f64>>,
    pub normalized_embedding: bool,
}

impl EmbedKey {
    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.n_bits == 0 {
            return Err(Error::InvalidConfig("n_bits must be at least 1".into()));
        }
        match (&self.mode, &self.reference_sigmas) {
            (Mode::Reference, Some(refs)) if refs.len() == self.n_bits => Ok(()),
            (Mode::Reference, Some(refs)) => Err(Error::InvalidConfig(format!(
                "reference_sigmas has {} entries, expected {}",
                refs.len(),
                self.n_bits
            ))),
            (Mode::Reference, None) => Err(Error::InvalidConfig(
                "reference mode requires reference_sigmas".into(),
            )),
            (Mode::Qim, None) => Ok(()),
            (Mode::Qim, Some(_)) => Err(Error::InvalidConfig(
                "qim mode must not carry reference_sigmas".into(),
            )),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("key serialization cannot fail")
    }

    pub fn from_json(raw: &str) -> Result<EmbedKey> {
        let key: EmbedKey = serde_json::from_str(raw)
            .map_err(|e| Error::MalformedRecord(format!("bad key JSON: {e}")))?;
        key.validate()?;
        Ok(key)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<EmbedKey> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        EmbedKey::from_json(&raw)
    }
}

/// Permutation sorting points lexicographically by (x, y, z), ties broken by
/// original index (a stable total order).
pub fn lex_sort(cloud: &PointCloud) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (cloud.points[a], cloud.points[b]);
        pa[0]
            .total_cmp(&pb[0])
            .then(pa[1].total_cmp(&pb[1]))
            .then(pa[2].total_cmp(&pb[2]))
            .then(a.cmp(&b))
    });
    order
}

/// Lexicographic order plus `n` contiguous, nearly equal index ranges.
#[derive(Debug, Clone)]
pub struct BlockPartition {
    pub sorted_order: Vec<usize>,
    pub ranges: Vec<std::ops::Range<usize>>,
}

impl BlockPartition {
    /// Partition `cloud` into `n` blocks; block i covers sorted positions
    /// `[floor(i N / n), floor((i+1) N / n))`.
    pub fn new(cloud: &PointCloud, n: usize) -> Result<BlockPartition> {
        if n == 0 {
            return Err(Error::InvalidConfig("block count must be positive".into()));
        }
        let len = cloud.len();
        if len < n {
            return Err(Error::TooFewPoints { have: len, need: n });
        }
        let ranges = (0..n)
            .map(|i| (i * len / n)..((i + 1) * len / n))
            .collect();
        Ok(BlockPartition {
            sorted_order: lex_sort(cloud),
            ranges,
        })
    }

    /// Original point indices of block `i`, in sorted order.
    pub fn block_indices(&self, i: usize) -> &[usize] {
        &self.sorted_order[self.ranges[i].clone()]
    }

    pub fn block_count(&self) -> usize {
        self.ranges.len()
    }
}

/// Dominant singular triple and full spectrum of an m-by-3 block.
#[derive(Debug, Clone)]
pub struct BlockSvd {
    /// Singular values, descending.
    pub sigmas: [f64; 3],
    /// Leading left singular vector (length m, unit norm when sigma1 > 0).
    pub u1: Vec<f64>,
    /// Leading right singular vector, sign-fixed so its largest-magnitude
    /// component is positive (ties resolved to the first such component).
    pub v1: [f64; 3],
}

/// Singular structure of a block via the 3x3 Gram matrix.
///
/// The Gram eigendecomposition uses a cyclic Jacobi sweep, which is exact to
/// round-off for symmetric 3x3 matrices and fully deterministic. A zero
/// block yields sigmas of 0 with the conventional `v1 = (1,0,0)`, `u1 = e1`.
pub fn block_svd(rows: &[Point]) -> BlockSvd {
    let m = rows.len();
    let mut gram = [[0.0f64; 3]; 3];
    for p in rows {
        for r in 0..3 {
            for c in r..3 {
                gram[r][c] += p[r] * p[c];
            }
        }
    }
    gram[1][0] = gram[0][1];
    gram[2][0] = gram[0][2];
    gram[2][1] = gram[1][2];

    let (eigenvalues, vectors) = sym3_eigen(gram);
    let sigmas = [
        eigenvalues[0].max(0.0).sqrt(),
        eigenvalues[1].max(0.0).sqrt(),
        eigenvalues[2].max(0.0).sqrt(),
    ];

    let mut v1 = if sigmas[0] > 0.0 {
        [vectors[0][0], vectors[1][0], vectors[2][0]]
    } else {
        [1.0, 0.0, 0.0]
    };
    // Sign convention: the largest-|component| of v1 is positive.
    let lead = (0..3)
        .max_by(|&a, &b| v1[a].abs().total_cmp(&v1[b].abs()).then(b.cmp(&a)))
        .unwrap();
    if v1[lead] < 0.0 {
        for c in &mut v1 {
            *c = -*c;
        }
    }

    let u1 = if sigmas[0] > 0.0 {
        rows.iter()
            .map(|p| (p[0] * v1[0] + p[1] * v1[1] + p[2] * v1[2]) / sigmas[0])
            .collect()
    } else {
        let mut e1 = vec![0.0; m];
        if m > 0 {
            e1[0] = 1.0;
        }
        e1
    };

    BlockSvd { sigmas, u1, v1 }
}

/// Eigendecomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns of the returned matrix.
fn sym3_eigen(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[0.0; 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale: f64 = {
        let mut s = 0.0;
        for row in &a {
            for x in row {
                s += x * x;
            }
        }
        s.sqrt().max(f64::MIN_POSITIVE)
    };

    for _sweep in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;

            let (app, aqq) = (a[p][p], a[q][q]);
            a[p][p] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
            a[q][q] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            let r = 3 - p - q;
            let (arp, arq) = (a[r][p], a[r][q]);
            a[r][p] = c * arp - s * arq;
            a[p][r] = a[r][p];
            a[r][q] = s * arp + c * arq;
            a[q][r] = a[r][q];

            for row in &mut v {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }

    // Sort eigenpairs descending; index tie-break keeps this deterministic.
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]).then(x.cmp(&y)));
    let values = [a[idx[0]][idx[0]], a[idx[1]][idx[1]], a[idx[2]][idx[2]]];
    let mut sorted_v = [[0.0; 3]; 3];
    for (col_out, &col_in) in idx.iter().enumerate() {
        for row in 0..3 {
            sorted_v[row][col_out] = v[row][col_in];
        }
    }
    (values, sorted_v)
}

/// Dominant singular value of each block of the (already normalized) cloud.
pub fn block_sigma1s(cloud: &PointCloud, n: usize) -> Result<Vec<f64>> {
    Ok(block_spectra(cloud, n)?.iter().map(|s| s[0]).collect())
}

/// Full singular spectrum of each block.
fn block_spectra(cloud: &PointCloud, n: usize) -> Result<Vec<[f64; 3]>> {
    let partition = BlockPartition::new(cloud, n)?;
    Ok((0..n)
        .map(|i| {
            let rows: Vec<Point> = partition
                .block_indices(i)
                .iter()
                .map(|&j| cloud.points[j])
                .collect();
            block_svd(&rows).sigmas
        })
        .collect())
}

fn qim_target(sigma: f64, alpha: f64, bit: u8) -> f64 {
    alpha * ((sigma / alpha).floor() + 0.25 + 0.5 * bit as f64)
}

/// Rank-1 update of each constrained block so its dominant singular value
/// lands on the given aim; `None` blocks are untouched. Points are written
/// back at their original indices.
fn apply_block_aims(cloud: &PointCloud, aims: &[Option<f64>]) -> Result<PointCloud> {
    let partition = BlockPartition::new(cloud, aims.len())?;
    let mut points = cloud.points.clone();
    for (i, aim) in aims.iter().enumerate() {
        let Some(aim) = aim else { continue };
        let indices = partition.block_indices(i);
        let rows: Vec<Point> = indices.iter().map(|&j| cloud.points[j]).collect();
        let svd = block_svd(&rows);
        let delta = aim - svd.sigmas[0];
        if delta == 0.0 {
            continue;
        }
        for (row, &j) in indices.iter().enumerate() {
            let scale = delta * svd.u1[row];
            points[j][0] += scale * svd.v1[0];
            points[j][1] += scale * svd.v1[1];
            points[j][2] += scale * svd.v1[2];
        }
    }
    Ok(PointCloud::new(points))
}

/// Per-mode target spectra given the pre-embedding block sigmas. A zero bit
/// in reference mode means "no shift", so its block carries no target: it
/// may drift below the reference freely, which only deepens its decode
/// margin.
fn mode_targets(initial: &[f64], wm: &Watermark, key: &EmbedKey) -> Vec<Option<f64>> {
    initial
        .iter()
        .zip(wm.bits())
        .enumerate()
        .map(|(i, (&sigma, &bit))| match key.mode {
            Mode::Reference if bit == 0 => None,
            Mode::Reference => {
                Some(key.reference_sigmas.as_ref().expect("validated key")[i] + key.alpha)
            }
            Mode::Qim => Some(qim_target(sigma, key.alpha, bit)),
        })
        .collect()
}

/// One rank-1 embedding pass: every block's dominant singular value is moved
/// to its per-mode target, points written back at their original indices.
/// No renormalization, no verification; [`embed`] wraps this in a
/// verify/re-embed loop. Exposed for distortion diagnostics.
pub fn embed_pass(cloud: &PointCloud, wm: &Watermark, key: &EmbedKey) -> Result<PointCloud> {
    let initial = block_sigma1s(cloud, wm.len())?;
    apply_block_aims(cloud, &mode_targets(&initial, wm, key))
}

/// Iteration cap for the embed/renormalize/verify loop.
const EMBED_MAX_ITERS: usize = 20;

/// Embed `wm` into a normalized cloud, returning the watermarked cloud and
/// the extraction key. The output satisfies `extract(out, key) == wm`
/// exactly; the loop re-embeds on the renormalized cloud until that holds.
pub fn embed(
    cloud: &PointCloud,
    wm: &Watermark,
    alpha: f64,
    mode: Mode,
) -> Result<(PointCloud, EmbedKey)> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let n = wm.len();
    if cloud.len() < n {
        return Err(Error::TooFewPoints {
            have: cloud.len(),
            need: n,
        });
    }
    if !cloud.is_normalized(1e-6) {
        return Err(Error::NonNormalizedInput(format!(
            "centroid norm {:.3e}, max norm {:.9}",
            crate::geometry::norm(cloud.centroid()),
            cloud.max_norm()
        )));
    }

    // Reference spectra come from the renormalized pristine cloud, the same
    // frame extraction will reconstruct.
    let (pristine, _) = normalize(cloud)?;
    let spectra = block_spectra(&pristine, n)?;
    let initial: Vec<f64> = spectra.iter().map(|s| s[0]).collect();
    let key = EmbedKey {
        mode,
        alpha,
        n_bits: n,
        reference_sigmas: match mode {
            Mode::Reference => Some(initial.clone()),
            Mode::Qim => None,
        },
        normalized_embedding: true,
    };

    // Convergence targets. QIM cells are chosen relative to the pristine
    // sigma, hopping up by whole cells while the center sits below sigma2:
    // a rank-1 shift cannot place the dominant value under the second one,
    // and any cell of the right parity decodes to the same bit.
    let targets: Vec<Option<f64>> = spectra
        .iter()
        .zip(wm.bits())
        .map(|(s, &bit)| match mode {
            Mode::Reference if bit == 0 => None,
            Mode::Reference => Some(s[0] + alpha),
            Mode::Qim => {
                let mut cell = qim_target(s[0], alpha, bit);
                while cell < s[1] + 0.25 * alpha {
                    cell += alpha;
                }
                Some(cell)
            }
        })
        .collect();

    // Two obstructions drive the verify/re-embed loop. First, the rank-1
    // updates inflate the cloud and the extraction-side renormalization
    // then divides every sigma by the new maximal norm, so corrections are
    // multiplicative (renormalization cancels additive growth). Second,
    // when a block's outermost point aligns with its stretch direction the
    // division cancels the stretch entirely; clamping stretched points back
    // onto the unit ball escapes that, folding mass toward the stretch
    // poles, which raises the block sigma without raising the maximal norm.
    let band = 0.1 * alpha;
    let shortfall = |target: f64, sigma: f64| match mode {
        Mode::Reference => (target - sigma).max(0.0),
        Mode::Qim => (target - sigma).abs(),
    };
    let mut aims = targets.clone();
    let mut work = cloud.clone();
    let mut best: Option<(f64, PointCloud)> = None;
    for iteration in 0..=EMBED_MAX_ITERS {
        let measured = block_sigma1s(&normalize(&work)?.0, n)?;
        let worst = targets
            .iter()
            .zip(measured.iter())
            .filter_map(|(t, &m)| t.map(|t| shortfall(t, m)))
            .fold(0.0f64, f64::max);
        if extract(&work, &key)?.bits() == wm.bits() {
            if worst <= band {
                return Ok((work, key));
            }
            if best.as_ref().is_none_or(|(w, _)| worst < *w) {
                best = Some((worst, work.clone()));
            }
        }
        if iteration == EMBED_MAX_ITERS {
            break;
        }
        if iteration > 0 {
            for (aim, (target, &sigma)) in
                aims.iter_mut().zip(targets.iter().zip(measured.iter()))
            {
                let (Some(aim), Some(target)) = (aim.as_mut(), target) else {
                    continue;
                };
                if sigma > 1e-12 {
                    *aim *= target / sigma;
                } else {
                    *aim += target - sigma;
                }
            }
        }
        let mut updated = apply_block_aims(&work, &aims)?;
        for p in &mut updated.points {
            let norm2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
            if norm2 > 1.0 {
                let inv = 1.0 / norm2.sqrt();
                p[0] *= inv;
                p[1] *= inv;
                p[2] *= inv;
            }
        }
        work = normalize(&updated)?.0;
    }
    match best {
        Some((_, cloud)) => Ok((cloud, key)),
        None => Err(Error::EmbedNonConvergent(EMBED_MAX_ITERS)),
    }
}

/// Recover the watermark: renormalize, re-sort, re-partition, recompute the
/// block spectra, and threshold per mode.
pub fn extract(cloud: &PointCloud, key: &EmbedKey) -> Result<Watermark> {
    key.validate()?;
    let n = key.n_bits;
    if cloud.len() < n {
        return Err(Error::TooFewPoints {
            have: cloud.len(),
            need: n,
        });
    }
    let work = if key.normalized_embedding {
        normalize(cloud)?.0
    } else {
        cloud.clone()
    };
    let sigmas = block_sigma1s(&work, n)?;
    let bits = sigmas
        .iter()
        .enumerate()
        .map(|(i, &sigma)| match key.mode {
            Mode::Reference => {
                let reference = key.reference_sigmas.as_ref().expect("validated key")[i];
                u8::from((sigma - reference) / key.alpha >= 0.5)
            }
            Mode::Qim => u8::from((sigma / key.alpha).fract() >= 0.5),
        })
        .collect();
    Watermark::new(bits)
}
