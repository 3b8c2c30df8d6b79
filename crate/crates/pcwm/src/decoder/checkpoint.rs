//! Checkpoint container: magic `PCWMCKPT`, u32 version, length-prefixed
//! JSON config, then the flattened little-endian f32 parameters. Round-trips
//! bit-exactly.

use std::path::Path;

use crate::decoder::config::DecoderConfig;
use crate::decoder::net::DecoderParams;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"PCWMCKPT";
const VERSION: u32 = 1;

/// A trained decoder with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: DecoderConfig,
    pub params: DecoderParams<f32>,
    pub best_val_accuracy: f64,
    pub epoch: u32,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let config_json = serde_json::to_vec(&self.config).expect("config serializes");
        let flat = self.params.flatten();
        let mut out = Vec::with_capacity(32 + config_json.len() + flat.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.best_val_accuracy.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&(config_json.len() as u32).to_le_bytes());
        out.extend_from_slice(&config_json);
        out.extend_from_slice(&(flat.len() as u32).to_le_bytes());
        for value in flat {
            out.extend_from_slice(&value.to_le_bytes());
        }
        out
    }

    pub fn decode(raw: &[u8]) -> Result<Checkpoint> {
        let take = |at: usize, len: usize| -> Result<&[u8]> {
            raw.get(at..at + len)
                .ok_or_else(|| Error::MalformedCheckpoint("truncated".into()))
        };
        if take(0, 8)? != MAGIC {
            return Err(Error::MalformedCheckpoint("bad magic".into()));
        }
        let version = u32::from_le_bytes(take(8, 4)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: VERSION,
            });
        }
        let best_val_accuracy = f64::from_le_bytes(take(12, 8)?.try_into().unwrap());
        let epoch = u32::from_le_bytes(take(20, 4)?.try_into().unwrap());
        let config_len = u32::from_le_bytes(take(24, 4)?.try_into().unwrap()) as usize;
        let config: DecoderConfig = serde_json::from_slice(take(28, config_len)?)
            .map_err(|e| Error::MalformedCheckpoint(format!("bad config block: {e}")))?;
        config.validate()?;
        let at = 28 + config_len;
        let count = u32::from_le_bytes(take(at, 4)?.try_into().unwrap()) as usize;
        if count != config.parameter_count() {
            return Err(Error::MalformedCheckpoint(format!(
                "parameter count {count} does not match config ({})",
                config.parameter_count()
            )));
        }
        let payload = take(at + 4, count * 4)?;
        if raw.len() != at + 4 + count * 4 {
            return Err(Error::MalformedCheckpoint("trailing bytes".into()));
        }
        let flat: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let params = DecoderParams::from_flat(&config, &flat)?;
        Ok(Checkpoint {
            config,
            params,
            best_val_accuracy,
            epoch,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::decode(&raw)
    }
}
