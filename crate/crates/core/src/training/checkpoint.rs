//! Binary parameter container.
//!
//! Layout (little-endian): magic `LMCK`, format version `u32`, a `u32`
//! length-prefixed JSON header, a `u32` block count, then per block the
//! `u32` length-prefixed name, `rows: u32`, `cols: u32` and `rows * cols`
//! `f32` values. Parameters are stored at 32-bit precision, so a loaded
//! checkpoint re-saves to identical bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::head::{MilHead, Pooling};
use super::trainer::TrainConfig;
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::kernel::ParamSet;
use crate::lstm::{AutoencoderConfig, AutoencoderParams};

pub const MAGIC: &[u8; 4] = b"LMCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// A trained model: frozen autoencoder, pooling head and the configuration
/// that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub config: TrainConfig,
    pub autoencoder: AutoencoderParams,
    pub head: MilHead,
    pub metadata: TrainingMetadata,
}

/// Output of standalone autoencoder pretraining.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderCheckpoint {
    pub config: AutoencoderConfig,
    pub params: AutoencoderParams,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Header {
    Model {
        seed: u64,
        embedding_dim: usize,
        hidden: usize,
        pooling: Pooling,
        attention_dim: Option<usize>,
        config: TrainConfig,
        metadata: TrainingMetadata,
    },
    Autoencoder {
        seed: u64,
        embedding_dim: usize,
        hidden: usize,
        config: AutoencoderConfig,
        loss_history: Vec<f64>,
    },
}

impl ModelCheckpoint {
    pub fn new(
        mut config: TrainConfig,
        autoencoder: AutoencoderParams,
        head: MilHead,
        metadata: TrainingMetadata,
    ) -> Result<Self> {
        autoencoder.validate()?;
        head.validate()?;
        if head.feature_dim() != autoencoder.hidden() {
            return Err(Error::shape("checkpoint head", autoencoder.hidden(), head.feature_dim()));
        }
        config.autoencoder.seed = config.seed;
        config.head.pooling = head.pooling;
        Ok(Self {
            config,
            autoencoder,
            head,
            metadata,
        })
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn threshold(&self) -> f64 {
        self.config.threshold
    }

    pub fn embedding_dim(&self) -> usize {
        self.autoencoder.embedding_dim()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header::Model {
            seed: self.seed(),
            embedding_dim: self.embedding_dim(),
            hidden: self.autoencoder.hidden(),
            pooling: self.head.pooling,
            attention_dim: self.head.attention_dim(),
            config: self.config.clone(),
            metadata: self.metadata,
        };
        encode(&header, &[&self.autoencoder, &self.head])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, mut reader) = decode_header(bytes)?;
        let Header::Model {
            seed,
            embedding_dim,
            hidden,
            pooling,
            attention_dim,
            mut config,
            metadata,
        } = header
        else {
            return Err(Error::Format("checkpoint holds an autoencoder, not a model".into()));
        };
        let dims_ok = embedding_dim > 0 && hidden > 0 && attention_dim != Some(0);
        if !dims_ok || attention_dim.is_some() != (pooling == Pooling::Attention) {
            return Err(Error::Format("checkpoint header has inconsistent dimensions".into()));
        }
        let mut autoencoder = AutoencoderParams::zeros(embedding_dim, hidden);
        let mut head = MilHead::zeros(pooling, hidden, attention_dim.unwrap_or(0));
        read_blocks(&mut reader, &mut [&mut autoencoder, &mut head])?;
        config.seed = seed;
        Self::new(config, autoencoder, head, metadata)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

impl AutoencoderCheckpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header::Autoencoder {
            seed: self.config.seed,
            embedding_dim: self.params.embedding_dim(),
            hidden: self.params.hidden(),
            config: self.config.clone(),
            loss_history: self.loss_history.clone(),
        };
        encode(&header, &[&self.params])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, mut reader) = decode_header(bytes)?;
        let Header::Autoencoder {
            seed,
            embedding_dim,
            hidden,
            mut config,
            loss_history,
        } = header
        else {
            return Err(Error::Format("checkpoint holds a model, not an autoencoder".into()));
        };
        if embedding_dim == 0 || hidden == 0 {
            return Err(Error::Format("checkpoint header has zero dimensions".into()));
        }
        let mut params = AutoencoderParams::zeros(embedding_dim, hidden);
        read_blocks(&mut reader, &mut [&mut params])?;
        config.seed = seed;
        Ok(Self {
            config,
            params,
            loss_history,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

fn encode(header: &Header, sets: &[&dyn ParamSet]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header).map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
    let mut w = Writer::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.len_u32(json.len())?;
    w.bytes(&json);
    let blocks: Vec<_> = sets.iter().flat_map(|s| s.blocks()).collect();
    w.len_u32(blocks.len())?;
    for b in &blocks {
        w.len_u32(b.name.len())?;
        w.bytes(b.name.as_bytes());
        w.len_u32(b.rows)?;
        w.len_u32(b.cols)?;
        for &v in b.data {
            let v = v as f32;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("parameter block `{}` is not finite at f32 precision", b.name)));
            }
            w.f32(v);
        }
    }
    Ok(w.into_inner())
}

fn decode_header(bytes: &[u8]) -> Result<(Header, Reader<'_>)> {
    let mut r = Reader::new(bytes, "checkpoint");
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version} (expected {VERSION})")));
    }
    let len = r.u32()? as usize;
    let header = serde_json::from_slice(r.take(len)?)
        .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
    Ok((header, r))
}

/// Reads blocks into templates whose layout fixes the expected names and
/// shapes.
fn read_blocks(r: &mut Reader<'_>, targets: &mut [&mut dyn ParamSet]) -> Result<()> {
    let expected: Vec<(String, usize, usize)> = targets
        .iter()
        .flat_map(|t| t.blocks().into_iter().map(|b| (b.name, b.rows, b.cols)))
        .collect();
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(Error::Format(format!("checkpoint has {count} blocks, expected {}", expected.len())));
    }
    let mut values = Vec::new();
    for (name, rows, cols) in &expected {
        let got = r.string()?;
        let (got_rows, got_cols) = (r.u32()? as usize, r.u32()? as usize);
        if &got != name || got_rows != *rows || got_cols != *cols {
            return Err(Error::Format(format!(
                "checkpoint block `{got}` ({got_rows}x{got_cols}) where `{name}` ({rows}x{cols}) was expected"
            )));
        }
        for _ in 0..rows * cols {
            let v = r.f32()?;
            if !v.is_finite() {
                return Err(Error::Format(format!("non-finite value in block `{name}`")));
            }
            values.push(f64::from(v));
        }
    }
    r.finish()?;
    let mut offset = 0;
    for t in targets.iter_mut() {
        let n = t.num_params();
        t.set_flat(&values[offset..offset + n])?;
        offset += n;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{stream_rng, Stream};

    fn sample(pooling: Pooling) -> ModelCheckpoint {
        let mut rng = stream_rng(9, Stream::HeadInit);
        let ae = AutoencoderParams::init(4, 3, &mut rng);
        let head = MilHead::init(pooling, 3, 2, &mut rng);
        let cfg = TrainConfig { seed: 9, ..TrainConfig::default() };
        let meta = TrainingMetadata {
            epochs_run: 7,
            best_epoch: 4,
            best_val_loss: 0.1234567891234,
        };
        ModelCheckpoint::new(cfg, ae, head, meta).unwrap()
    }

    #[test]
    fn resave_is_byte_identical() {
        for pooling in Pooling::ALL {
            let first = sample(pooling).to_bytes().unwrap();
            let loaded = ModelCheckpoint::from_bytes(&first).unwrap();
            let second = loaded.to_bytes().unwrap();
            assert_eq!(first, second);
            assert_eq!(ModelCheckpoint::from_bytes(&second).unwrap(), loaded);
        }
    }

    #[test]
    fn parameters_survive_at_f32_precision() {
        let ck = sample(Pooling::Attention);
        let loaded = ModelCheckpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap();
        for (a, b) in ck.autoencoder.to_flat().iter().zip(loaded.autoencoder.to_flat()) {
            assert_eq!(*a as f32, b as f32);
        }
        assert_eq!(loaded.metadata, ck.metadata);
        assert_eq!(loaded.config, ck.config);
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = sample(Pooling::Mean).to_bytes().unwrap();
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(ModelCheckpoint::from_bytes(&bad_magic), Err(Error::Format(_))));
        let mut bad_version = bytes.clone();
        bad_version[4] = 2;
        let err = ModelCheckpoint::from_bytes(&bad_version).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
        for cut in [3, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(ModelCheckpoint::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut trailing = bytes;
        trailing.push(0);
        assert!(ModelCheckpoint::from_bytes(&trailing).is_err());
    }

    #[test]
    fn kinds_are_not_interchangeable() {
        let ck = sample(Pooling::Attention);
        let ae = AutoencoderCheckpoint {
            config: AutoencoderConfig { seed: 3, ..AutoencoderConfig::default() },
            params: ck.autoencoder.clone(),
            loss_history: vec![1.0, 0.5],
        };
        let bytes = ae.to_bytes().unwrap();
        assert!(ModelCheckpoint::from_bytes(&bytes).is_err());
        assert!(AutoencoderCheckpoint::from_bytes(&ck.to_bytes().unwrap()).is_err());
        let back = AutoencoderCheckpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.config, ae.config);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.lmck");
        let ck = sample(Pooling::Max);
        ck.save(&path).unwrap();
        let loaded = ModelCheckpoint::load(&path).unwrap();
        assert_eq!(loaded.head.pooling, Pooling::Max);
        assert!(ModelCheckpoint::load(&dir.path().join("missing")).is_err());
    }
}
