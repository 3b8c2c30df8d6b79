use pcwm::decoder::*;
use pcwm::geometry::{normalize, sample_surface};
use pcwm::synthetic::{make_mesh, FAMILIES};
use pcwm::watermark::{embed, Mode, Watermark};

fn main() -> pcwm::Result<()> {
    // 32 clouds x 8 patterns = 256 samples.
    let mut samples = Vec::new();
    for i in 0..32u64 {
        let family = FAMILIES[(i % 6) as usize];
        let mesh = make_mesh(family, i * 247 + 5)?;
        let cloud = normalize(&sample_surface(&mesh, 256, i)?)?.0;
        for pattern in 0..8u64 {
            let wm = Watermark::from_index(pattern, 3)?;
            let (marked, _) = embed(&cloud, &wm, 2.0, Mode::Reference)?;
            samples.push(TrainSample { cloud: marked, bits: wm.bits().to_vec() });
        }
    }
    println!("{} samples", samples.len());
    let config = DecoderConfig {
        n_bits: 3,
        sa1: SetAbstraction { centroids: 32, k: 8, mlp: vec![3, 16, 32] },
        sa2: SetAbstraction { centroids: 8, k: 8, mlp: vec![35, 64] },
        head: vec![64, 32, 3],
    };
    let tc = TrainConfig {
        epochs: 60,
        batch_size: 32,
        lr: 2e-3,
        augment: false,
        seed: 11,
        ..TrainConfig::default()
    };
    let t0 = std::time::Instant::now();
    let report = train(&samples, &samples, &config, &tc)?;
    for row in report.log.iter().step_by(5) {
        println!("epoch {:>3}: train_loss {:.4} train_acc {:.3} val_acc {:.3} lr {:.1e}",
            row.epoch, row.train_loss, row.train_acc, row.val_acc, row.lr);
    }
    println!("last: {:?}", report.log.last().map(|r| (r.train_acc, r.val_acc)));
    println!("elapsed {:.1?}", t0.elapsed());
    Ok(())
}
