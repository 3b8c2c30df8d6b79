//! End-to-end robustness benchmark: build a synthetic dataset tree, train
//! a compact decoder, evaluate both decoders under the attack catalogue,
//! and render the CSV/markdown/SVG report.
//!
//! Run with: `cargo run --release --example evaluate_robustness`

use pcwm::decoder::{DecoderConfig, SetAbstraction, TrainConfig};
use pcwm::harness::{
    build_manifest, ownership_roc, render_report, run_evaluation, train_from_manifest,
    EmbedConfig,
};
use pcwm::synthetic::write_dataset;

fn main() -> pcwm::Result<()> {
    let root = std::env::temp_dir().join("pcwm_eval_example_dataset");
    let report_dir = std::env::temp_dir().join("pcwm_eval_example_report");
    if !root.join("sphere").exists() {
        let written = write_dataset(&root, 6, 2, 99)?;
        println!("wrote {written} synthetic meshes under {}", root.display());
    }

    let manifest = build_manifest(&root, 512, 3, 17)?;
    println!("manifest: {}", manifest.summary());

    let embed_config = EmbedConfig::default();
    let decoder_config = DecoderConfig {
        n_bits: 3,
        sa1: SetAbstraction {
            centroids: 64,
            k: 8,
            mlp: vec![3, 16, 32],
        },
        sa2: SetAbstraction {
            centroids: 16,
            k: 8,
            mlp: vec![35, 64],
        },
        head: vec![64, 32, 3],
    };
    let train_config = TrainConfig {
        epochs: 15,
        batch_size: 16,
        seed: 5,
        ..TrainConfig::default()
    };
    println!("training compact decoder ({} epochs)...", train_config.epochs);
    let trained = train_from_manifest(&manifest, &embed_config, &decoder_config, &train_config)?;
    println!(
        "best validation accuracy {:.3} at epoch {}",
        trained.checkpoint.best_val_accuracy, trained.checkpoint.epoch
    );

    let mut bundle = run_evaluation(&manifest, &embed_config, &trained.checkpoint, &[], 23)?;
    bundle.roc = Some(ownership_roc(
        &manifest,
        &embed_config,
        &trained.checkpoint,
        4,
        23,
    )?);

    println!("\n{:<42} {:>8} {:>8} {:>8}", "attack", "svd", "neural", "gap");
    for gap in &bundle.gaps {
        println!(
            "{:<42} {:>8.3} {:>8.3} {:>+8.3}",
            gap.attack, gap.svd_accuracy, gap.dl_accuracy, gap.gap
        );
    }
    if let Some(roc) = &bundle.roc {
        println!("\nownership AUC: {:.3}", roc.auc);
    }

    let files = render_report(&bundle, &report_dir)?;
    println!("\nreport files:");
    for file in files {
        println!("  {}", file.display());
    }
    Ok(())
}
