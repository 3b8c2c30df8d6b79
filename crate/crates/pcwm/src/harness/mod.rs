//! Evaluation harness: manifests, the embed/attack/extract pipeline,
//! ownership ROC and report rendering.

mod evaluate;
mod manifest;
mod report;

pub use evaluate::{
    ownership_roc, run_evaluation, EmbedConfig, GapRow, MetricStats, ReportBundle, ResultRow,
    RocReport,
};
pub use manifest::{build_manifest, load_cloud, sampling_seed, DatasetManifest, ManifestEntry};
pub use report::{
    accuracy_bars_svg, fidelity_table_md, gap_table_md, render_report, results_csv, roc_csv,
    roc_curve_svg, sig6, RESULTS_CSV_HEADER,
};

use rayon::prelude::*;

use crate::decoder::{train, TrainConfig, TrainReport, TrainSample};
use crate::error::Result;
use crate::watermark::embed;

/// Build watermarked training and validation samples from a manifest and
/// train a decoder on them. Clouds whose embedding fails are skipped; the
/// validation split is the manifest's test split, evaluated clean.
pub fn train_from_manifest(
    manifest: &DatasetManifest,
    embed_config: &EmbedConfig,
    decoder_config: &crate::decoder::DecoderConfig,
    train_config: &TrainConfig,
) -> Result<TrainReport> {
    let build = |entries: &[ManifestEntry]| -> Vec<TrainSample> {
        let samples: Vec<Option<TrainSample>> = entries
            .par_iter()
            .map(|entry| {
                let cloud = load_cloud(entry, manifest.n_points, manifest.seed).ok()?;
                let (marked, _) =
                    embed(&cloud, &entry.watermark, embed_config.alpha, embed_config.mode)
                        .ok()?;
                Some(TrainSample {
                    cloud: marked,
                    bits: entry.watermark.bits().to_vec(),
                })
            })
            .collect();
        samples.into_iter().flatten().collect()
    };
    let train_set = build(&manifest.train);
    let val_set = build(&manifest.test);
    train(&train_set, &val_set, decoder_config, train_config)
}
