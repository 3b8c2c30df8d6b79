use pcwm::decoder::{DecoderConfig, SetAbstraction, TrainConfig};
use pcwm::harness::*;
use pcwm::synthetic::write_dataset;

fn main() -> pcwm::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let attacks_aug: bool = args.get(2).map(|s| s == "attacks").unwrap_or(false);

    let root = std::env::temp_dir().join("pcwm_desk_dataset");
    if !root.join("sphere").exists() {
        write_dataset(&root, 40, 17, 2025)?;
    }
    let manifest = build_manifest(&root, 512, 3, 42)?;
    eprintln!("manifest: {}", manifest.summary());

    let embed_config = EmbedConfig::default();
    let decoder_config = DecoderConfig {
        n_bits: 3,
        sa1: SetAbstraction { centroids: 128, k: 8, mlp: vec![3, 24, 48] },
        sa2: SetAbstraction { centroids: 32, k: 8, mlp: vec![51, 96] },
        head: vec![96, 48, 3],
    };
    let tc = TrainConfig {
        epochs,
        batch_size: 32,
        lr: 2e-3,
        augment: true,
        augment_with_attacks: attacks_aug,
        seed: 7,
        ..TrainConfig::default()
    };
    let t0 = std::time::Instant::now();
    let trained = train_from_manifest(&manifest, &embed_config, &decoder_config, &tc)?;
    eprintln!("trained {} epochs in {:.1?}; best val acc {:.3} at {}",
        epochs, t0.elapsed(), trained.checkpoint.best_val_accuracy, trained.checkpoint.epoch);
    for row in trained.log.iter().step_by((epochs / 10).max(1)) {
        eprintln!("  epoch {:>3}: t_loss {:.4} t_acc {:.3} v_loss {:.4} v_acc {:.3} lr {:.1e}",
            row.epoch, row.train_loss, row.train_acc, row.val_loss, row.val_acc, row.lr);
    }

    let t1 = std::time::Instant::now();
    let bundle = run_evaluation(&manifest, &embed_config, &trained.checkpoint, &[], 23)?;
    eprintln!("evaluation in {:.1?} ({} clouds, {} skipped)", t1.elapsed(), bundle.n_clouds, bundle.skipped.len());
    println!("{:<44} {:>7} {:>7} {:>7}", "attack", "svd", "dl", "gap");
    for gap in &bundle.gaps {
        println!("{:<44} {:>7.3} {:>7.3} {:>+7.3}", gap.attack, gap.svd_accuracy, gap.dl_accuracy, gap.gap);
    }
    Ok(())
}
