//! Command-line interface.
//!
//! One thin binary (`pcwm`) dispatches into the library; every subcommand
//! is deterministic given its seed flags. Exit codes: 0 success, 1 usage
//! error, 2 data error, 3 internal error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::attack::{apply_attack, AttackSpec};
use crate::decoder::{Checkpoint, DecoderConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::geometry::{
    normalize, read_cloud, read_mesh, sample_surface, write_cloud, CloudFormat, PointCloud,
};
use crate::harness::{
    build_manifest, ownership_roc, render_report, roc_csv, roc_curve_svg, run_evaluation, sig6,
    train_from_manifest, EmbedConfig,
};
use crate::metrics::{bit_accuracy, chamfer, iou_bits, psnr};
use crate::watermark::{embed, extract, EmbedKey, Mode, Watermark};

/// Everything a batch run can configure, as one JSON document. Flags
/// override file values; unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub n_points: usize,
    pub n_bits: usize,
    pub alpha: f64,
    pub mode: Mode,
    /// Seed for manifest construction and per-file sampling streams.
    pub manifest_seed: u64,
    /// Seed for attack instantiation and ROC negatives.
    pub run_seed: u64,
    /// Explicit attack list; the 15-attack catalogue when absent.
    pub attacks: Option<Vec<AttackSpec>>,
    /// Decoder architecture; the standard configuration when absent.
    pub decoder: Option<DecoderConfig>,
    pub train: TrainConfig,
    /// Wrong patterns scored per cloud during ownership verification.
    pub negatives_per_cloud: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_points: 1024,
            n_bits: 3,
            alpha: 2.0,
            mode: Mode::Reference,
            manifest_seed: 0,
            run_seed: 0,
            attacks: None,
            decoder: None,
            train: TrainConfig::default(),
            negatives_per_cloud: 4,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: RunConfig = serde_json::from_str(&raw)
            .map_err(|e| Error::InvalidConfig(format!("bad run config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.n_bits == 0 || self.n_points == 0 {
            return Err(Error::InvalidConfig(
                "n_bits and n_points must be positive".into(),
            ));
        }
        self.train.validate()?;
        if let Some(decoder) = &self.decoder {
            decoder.validate()?;
        }
        Ok(())
    }

    fn embed_config(&self) -> EmbedConfig {
        EmbedConfig {
            mode: self.mode,
            alpha: self.alpha,
            n_bits: self.n_bits,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "pcwm",
    version,
    about = "Spectral watermarking for 3D point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a mesh file into a normalized point cloud.
    Sample {
        /// Input mesh (.off or .ply, ASCII).
        mesh: PathBuf,
        #[arg(long, default_value_t = 1024)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip the zero-mean / unit-max-norm normalization.
        #[arg(long)]
        raw: bool,
        /// Output cloud (.pcb binary, or .xyz ASCII by extension).
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Embed a watermark into a cloud.
    Embed {
        cloud: PathBuf,
        /// Payload bits, e.g. 101.
        #[arg(long)]
        bits: String,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, value_parser = parse_mode, default_value = "reference")]
        mode: Mode,
        #[arg(short, long)]
        output: PathBuf,
        /// Where to write the extraction key (JSON).
        #[arg(long)]
        key: PathBuf,
    },
    /// Extract a watermark; prints the recovered bits.
    Extract {
        cloud: PathBuf,
        #[arg(long)]
        key: PathBuf,
    },
    /// Apply a seeded attack described by a JSON spec file.
    Attack {
        cloud: PathBuf,
        /// Attack spec JSON: {"kind": ..., "params": {...}, "seed": ...}.
        #[arg(long)]
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Fidelity metrics between two clouds, plus recovery metrics when a
    /// key (and optionally the expected bits) is supplied.
    Metrics {
        cloud_a: PathBuf,
        cloud_b: PathBuf,
        #[arg(long)]
        key: Option<PathBuf>,
        /// Ground-truth bits to grade the extraction against.
        #[arg(long)]
        bits: Option<String>,
    },
    /// Train the neural decoder on a dataset tree.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Run configuration JSON (all fields optional).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output checkpoint path; the training log CSV lands next to it.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the full attack-suite evaluation and render a report.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// Run configuration JSON controlling embedding and attacks.
        #[arg(long = "key-config")]
        key_config: Option<PathBuf>,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Ownership-verification ROC analysis.
    Roc {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn parse_mode(raw: &str) -> std::result::Result<Mode, String> {
    match raw.to_ascii_lowercase().as_str() {
        "reference" => Ok(Mode::Reference),
        "qim" => Ok(Mode::Qim),
        other => Err(format!("invalid mode {other:?} (use reference|qim)")),
    }
}

/// Parse argv and dispatch; returns the process exit code.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) => 1,
                Error::Internal(_) => 3,
                _ => 2,
            }
        }
    }
}

fn load_normalized(path: &Path) -> Result<PointCloud> {
    let cloud = read_cloud(path)?;
    Ok(normalize(&cloud)?.0)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Sample {
            mesh,
            points,
            seed,
            raw,
            output,
        } => {
            if points == 0 {
                return Err(Error::InvalidConfig("points must be positive".into()));
            }
            let parsed = read_mesh(&mesh)?;
            let mut cloud = sample_surface(&parsed, points, seed)?;
            if !raw {
                cloud = normalize(&cloud)?.0;
            }
            write_cloud(&cloud, &output, CloudFormat::from_path(&output))?;
            println!("sampled {} points -> {}", cloud.len(), output.display());
            Ok(())
        }
        Command::Embed {
            cloud,
            bits,
            alpha,
            mode,
            output,
            key,
        } => {
            if alpha.is_nan() || alpha <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "alpha must be positive, got {alpha}"
                )));
            }
            let wm = Watermark::parse(&bits)?;
            let input = load_normalized(&cloud)?;
            let (marked, embed_key) = embed(&input, &wm, alpha, mode)?;
            write_cloud(&marked, &output, CloudFormat::from_path(&output))?;
            embed_key.write(&key)?;
            println!(
                "embedded {} bits ({:?}) -> {} (key {})",
                wm.len(),
                mode,
                output.display(),
                key.display()
            );
            Ok(())
        }
        Command::Extract { cloud, key } => {
            let embed_key = EmbedKey::read(&key)?;
            let input = read_cloud(&cloud)?;
            let wm = extract(&input, &embed_key)?;
            println!("{wm}");
            Ok(())
        }
        Command::Attack {
            cloud,
            spec,
            output,
        } => {
            let raw = std::fs::read_to_string(&spec).map_err(|e| Error::io(&spec, e))?;
            let spec = AttackSpec::from_json(&raw)?;
            let input = read_cloud(&cloud)?;
            let attacked = apply_attack(&input, &spec)?;
            write_cloud(&attacked, &output, CloudFormat::from_path(&output))?;
            println!(
                "{} -> {} points -> {}",
                spec.kind.label(),
                attacked.len(),
                output.display()
            );
            Ok(())
        }
        Command::Metrics {
            cloud_a,
            cloud_b,
            key,
            bits,
        } => {
            let a = read_cloud(&cloud_a)?;
            let b = read_cloud(&cloud_b)?;
            println!("chamfer: {}", sig6(chamfer(&a, &b)?));
            println!("psnr_db: {}", sig6(psnr(&a, &b)?));
            if let Some(key_path) = key {
                let embed_key = EmbedKey::read(&key_path)?;
                let recovered = extract(&b, &embed_key)?;
                println!("extracted: {recovered}");
                let reference = match bits {
                    Some(raw) => Watermark::parse(&raw)?,
                    None => extract(&a, &embed_key)?,
                };
                let accuracy = bit_accuracy(&reference, &recovered)?;
                println!("accuracy: {}", sig6(accuracy));
                println!("ber: {}", sig6(1.0 - accuracy));
                println!("iou: {}", sig6(iou_bits(&reference, &recovered)?));
            }
            Ok(())
        }
        Command::Train {
            dataset,
            config,
            epochs,
            seed,
            output,
        } => {
            let mut run_config = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            if let Some(epochs) = epochs {
                run_config.train.epochs = epochs;
            }
            if let Some(seed) = seed {
                run_config.train.seed = seed;
            }
            run_config.validate()?;
            let manifest = build_manifest(
                &dataset,
                run_config.n_points,
                run_config.n_bits,
                run_config.manifest_seed,
            )?;
            eprintln!("manifest: {}", manifest.summary());
            let decoder_config = run_config
                .decoder
                .clone()
                .unwrap_or_else(|| DecoderConfig::standard(run_config.n_bits));
            let report = train_from_manifest(
                &manifest,
                &run_config.embed_config(),
                &decoder_config,
                &run_config.train,
            )?;
            report.checkpoint.save(&output)?;
            let log_path = output.with_extension("log.csv");
            std::fs::write(&log_path, report.log_csv()).map_err(|e| Error::io(&log_path, e))?;
            println!(
                "best validation accuracy {:.4} at epoch {} -> {} (log {})",
                report.checkpoint.best_val_accuracy,
                report.checkpoint.epoch,
                output.display(),
                log_path.display()
            );
            Ok(())
        }
        Command::Evaluate {
            dataset,
            key_config,
            ckpt,
            output,
        } => {
            let run_config = match key_config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            let checkpoint = Checkpoint::load(&ckpt)?;
            let manifest = build_manifest(
                &dataset,
                run_config.n_points,
                run_config.n_bits,
                run_config.manifest_seed,
            )?;
            eprintln!("manifest: {}", manifest.summary());
            let attacks = run_config.attacks.clone().unwrap_or_default();
            let mut bundle = run_evaluation(
                &manifest,
                &run_config.embed_config(),
                &checkpoint,
                &attacks,
                run_config.run_seed,
            )?;
            bundle.roc = ownership_roc(
                &manifest,
                &run_config.embed_config(),
                &checkpoint,
                run_config.negatives_per_cloud,
                run_config.run_seed,
            )
            .ok();
            let files = render_report(&bundle, &output)?;
            for file in files {
                println!("wrote {}", file.display());
            }
            if !bundle.skipped.is_empty() {
                eprintln!("skipped {} clouds:", bundle.skipped.len());
                for (path, reason) in &bundle.skipped {
                    eprintln!("  {path}: {reason}");
                }
            }
            Ok(())
        }
        Command::Roc {
            dataset,
            config,
            ckpt,
            output,
        } => {
            let run_config = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            let checkpoint = Checkpoint::load(&ckpt)?;
            let manifest = build_manifest(
                &dataset,
                run_config.n_points,
                run_config.n_bits,
                run_config.manifest_seed,
            )?;
            let roc = ownership_roc(
                &manifest,
                &run_config.embed_config(),
                &checkpoint,
                run_config.negatives_per_cloud,
                run_config.run_seed,
            )?;
            std::fs::create_dir_all(&output).map_err(|e| Error::io(&output, e))?;
            let csv_path = output.join("roc.csv");
            std::fs::write(&csv_path, roc_csv(&roc)).map_err(|e| Error::io(&csv_path, e))?;
            let svg_path = output.join("roc_curve.svg");
            std::fs::write(&svg_path, roc_curve_svg(&roc))
                .map_err(|e| Error::io(&svg_path, e))?;
            println!("auc: {}", sig6(roc.auc));
            println!("wrote {}", csv_path.display());
            println!("wrote {}", svg_path.display());
            Ok(())
        }
    }
}
