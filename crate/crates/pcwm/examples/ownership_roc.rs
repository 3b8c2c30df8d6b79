//! Ownership verification: score true versus random wrong watermark claims
//! under a trained decoder and compute the ROC/AUC.
//!
//! Run with: `cargo run --release --example ownership_roc`

use pcwm::decoder::{train, DecoderConfig, SetAbstraction, TrainConfig, TrainSample};
use pcwm::geometry::{normalize, sample_surface};
use pcwm::harness::{build_manifest, ownership_roc, EmbedConfig};
use pcwm::synthetic::{make_mesh, write_dataset, FAMILIES};
use pcwm::watermark::{embed, Mode, Watermark};

fn main() -> pcwm::Result<()> {
    let root = std::env::temp_dir().join("pcwm_roc_example_dataset");
    if !root.join("sphere").exists() {
        write_dataset(&root, 4, 3, 31)?;
    }
    let manifest = build_manifest(&root, 512, 3, 13)?;
    println!("manifest: {}", manifest.summary());

    // A quick decoder gives a mid-range AUC; training longer sharpens it.
    let mut train_set = Vec::new();
    for (fi, family) in FAMILIES.iter().enumerate() {
        for instance in 0..8u64 {
            let mesh = make_mesh(family, instance * 977 + fi as u64)?;
            let cloud = normalize(&sample_surface(&mesh, 512, instance)?)?.0;
            let wm = Watermark::from_index(instance ^ fi as u64, 3)?;
            let (marked, _) = embed(&cloud, &wm, 2.0, Mode::Reference)?;
            train_set.push(TrainSample {
                cloud: marked,
                bits: wm.bits().to_vec(),
            });
        }
    }
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
        epochs: 12,
        batch_size: 16,
        augment: false,
        seed: 3,
        ..TrainConfig::default()
    };
    let report = train(&train_set, &train_set, &decoder_config, &train_config)?;
    println!(
        "decoder trained: best accuracy {:.3}",
        report.checkpoint.best_val_accuracy
    );

    let roc = ownership_roc(&manifest, &EmbedConfig::default(), &report.checkpoint, 8, 77)?;
    println!("AUC: {:.3} over {} staircase points", roc.auc, roc.points.len());
    println!("threshold   tpr     fpr");
    for &(threshold, tpr, fpr) in roc.points.iter().take(12) {
        println!("{:>9.4} {:>6.3} {:>6.3}", threshold, tpr, fpr);
    }
    Ok(())
}
