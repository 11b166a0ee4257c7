//! Binary checkpoint container.
//!
//! Layout: the magic `QBEKCKPT`, a little-endian `u32` format version, a
//! little-endian `u64` header length, a JSON header, then every tensor as
//! little-endian `f64` (parameters first, then optimizer moments when
//! present), and finally the SHA-256 of all preceding bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::OptimizerState;
use crate::model::{EncoderConfig, ModelParams};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"QBEKCKPT";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    FormatVersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint vocabulary hash {found} does not match {expected}")]
    VocabHashMismatch { expected: String, found: String },
    #[error("corrupt checkpoint: {0}")]
    CorruptFile(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

/// Model parameters with everything needed to resume or reuse them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub config: EncoderConfig,
    pub params: ModelParams<T>,
    pub optimizer: Option<OptimizerState<T>>,
    pub vocab_hash: String,
    /// Training steps taken when the checkpoint was written.
    pub step: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: EncoderConfig,
    vocab_hash: String,
    step: u64,
    tensors: Vec<TensorEntry>,
    /// Adam update count, present when optimizer moments follow the parameters.
    optimizer_t: Option<u64>,
}

fn corrupt(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::CorruptFile(msg.into())
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let names = ModelParams::<T>::names(self.config.num_layers);
        let header = Header {
            config: self.config.clone(),
            vocab_hash: self.vocab_hash.clone(),
            step: self.step,
            tensors: self
                .params
                .tensors()
                .iter()
                .zip(names)
                .map(|(t, name)| TensorEntry { name, shape: [t.rows, t.cols] })
                .collect(),
            optimizer_t: self.optimizer.as_ref().map(|o| o.t),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        let mut sets = vec![&self.params];
        if let Some(o) = &self.optimizer {
            sets.extend([&o.m, &o.v]);
        }
        for set in sets {
            for t in set.tensors() {
                for x in &t.data {
                    out.extend_from_slice(&x.as_f64().to_le_bytes());
                }
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    /// Parses a checkpoint, rejecting it when `expected_vocab_hash` is given
    /// and differs from the stored hash.
    pub fn from_bytes(bytes: &[u8], expected_vocab_hash: Option<&str>) -> Result<Self, CheckpointError> {
        if bytes.len() < MAGIC.len() + 4 + 8 + DIGEST_LEN || &bytes[..8] != MAGIC {
            return Err(corrupt("missing checkpoint header"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(CheckpointError::FormatVersionMismatch { found: version, expected: FORMAT_VERSION });
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt("checksum mismatch"));
        }
        let header_len = u64::from_le_bytes(body[12..20].try_into().unwrap()) as usize;
        let json = body.get(20..20usize.saturating_add(header_len)).ok_or_else(|| corrupt("truncated header"))?;
        let header: Header = serde_json::from_slice(json).map_err(|e| corrupt(format!("header: {e}")))?;
        header.config.validate().map_err(|e| corrupt(e.to_string()))?;
        if let Some(expected) = expected_vocab_hash {
            if expected != header.vocab_hash {
                return Err(CheckpointError::VocabHashMismatch {
                    expected: expected.to_string(),
                    found: header.vocab_hash,
                });
            }
        }

        let template = ModelParams::<T>::zeros(&header.config);
        let names = ModelParams::<T>::names(header.config.num_layers);
        if header.tensors.len() != names.len() {
            return Err(corrupt("tensor count does not match config"));
        }
        for ((entry, name), t) in header.tensors.iter().zip(&names).zip(template.tensors()) {
            if &entry.name != name || entry.shape != [t.rows, t.cols] {
                return Err(corrupt(format!("unexpected tensor {} {:?}", entry.name, entry.shape)));
            }
        }
        let mut data = &body[20 + header_len..];
        let mut read_set = || -> Result<ModelParams<T>, CheckpointError> {
            let mut set = template.clone();
            for t in set.tensors_mut() {
                let n = t.data.len() * 8;
                if data.len() < n {
                    return Err(corrupt("truncated tensor data"));
                }
                let (chunk, rest) = data.split_at(n);
                t.data = chunk
                    .chunks_exact(8)
                    .map(|b| T::lit(f64::from_le_bytes(b.try_into().unwrap())))
                    .collect();
                data = rest;
            }
            Ok(set)
        };
        let params = read_set()?;
        let optimizer = match header.optimizer_t {
            Some(t) => Some(OptimizerState { m: read_set()?, v: read_set()?, t }),
            None => None,
        };
        if !data.is_empty() {
            return Err(corrupt("trailing bytes after tensor data"));
        }
        Ok(Self { config: header.config, params, optimizer, vocab_hash: header.vocab_hash, step: header.step })
    }
}

pub fn save_checkpoint<T: Scalar>(path: impl AsRef<Path>, ckpt: &Checkpoint<T>) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    fs::write(path, ckpt.to_bytes()).map_err(|e| CheckpointError::Io(path.display().to_string(), e))
}

pub fn load_checkpoint<T: Scalar>(
    path: impl AsRef<Path>,
    expected_vocab_hash: Option<&str>,
) -> Result<Checkpoint<T>, CheckpointError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| CheckpointError::Io(path.display().to_string(), e))?;
    Checkpoint::from_bytes(&bytes, expected_vocab_hash)
}

