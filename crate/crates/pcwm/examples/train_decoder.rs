//! Train a small neural decoder on watermarked synthetic clouds and watch
//! the per-epoch log.
//!
//! Run with: `cargo run --release --example train_decoder`

use pcwm::decoder::{train, DecoderConfig, TrainConfig, TrainSample};
use pcwm::geometry::{normalize, sample_surface};
use pcwm::synthetic::{make_mesh, FAMILIES};
use pcwm::watermark::{embed, Mode, Watermark};

fn main() -> pcwm::Result<()> {
    // 48 training clouds across the shape families, each watermarked with
    // one of the 8 possible 3-bit patterns; 24 held-out validation clouds.
    let mut train_set = Vec::new();
    let mut val_set = Vec::new();
    for (fi, family) in FAMILIES.iter().enumerate() {
        for instance in 0..12u64 {
            let mesh = make_mesh(family, instance * 131 + fi as u64)?;
            let cloud = normalize(&sample_surface(&mesh, 512, instance + 1)?)?.0;
            let wm = Watermark::from_index(instance * 7 + fi as u64, 3)?;
            let (marked, _) = embed(&cloud, &wm, 2.0, Mode::Reference)?;
            let sample = TrainSample {
                cloud: marked,
                bits: wm.bits().to_vec(),
            };
            if instance < 8 {
                train_set.push(sample);
            } else {
                val_set.push(sample);
            }
        }
    }
    println!("{} train / {} val samples", train_set.len(), val_set.len());

    let decoder_config = DecoderConfig {
        n_bits: 3,
        sa1: pcwm::decoder::SetAbstraction {
            centroids: 64,
            k: 8,
            mlp: vec![3, 16, 32],
        },
        sa2: pcwm::decoder::SetAbstraction {
            centroids: 16,
            k: 8,
            mlp: vec![35, 64],
        },
        head: vec![64, 32, 3],
    };
    let train_config = TrainConfig {
        epochs: 20,
        batch_size: 16,
        augment: false,
        seed: 7,
        ..TrainConfig::default()
    };
    let report = train(&train_set, &val_set, &decoder_config, &train_config)?;

    println!("epoch  train_loss  val_loss  train_acc  val_acc  lr");
    for row in &report.log {
        println!(
            "{:>5}  {:>10.4}  {:>8.4}  {:>9.3}  {:>7.3}  {:.1e}",
            row.epoch, row.train_loss, row.val_loss, row.train_acc, row.val_acc, row.lr
        );
    }
    println!(
        "best checkpoint: validation accuracy {:.3} at epoch {}",
        report.checkpoint.best_val_accuracy, report.checkpoint.epoch
    );

    let path = std::env::temp_dir().join("pcwm_train_example.pcwm");
    report.checkpoint.save(&path)?;
    println!("checkpoint saved to {}", path.display());
    Ok(())
}
