//! Binary checkpoint format.
//!
//! ```text
//! "MTRNN1" | u64 LE header length | JSON header | f32 LE payload | u64 LE checksum
//! ```
//!
//! The checksum is the first 8 bytes of the payload's SHA-256, read little-endian.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::{AdamHyper, AdamState, Parameter, Tensor};

use super::{ModelConfig, ModelParams};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"MTRNN1";
const FORMAT_VERSION: u32 = 1;
const FIRST_MOMENT: &str = "adam.m/";
const SECOND_MOMENT: &str = "adam.v/";

/// Training position stored alongside the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// Number of completed optimizer steps.
    pub step: u64,
    pub seed: u64,
    /// Free-form payload, e.g. the training config.
    #[serde(default)]
    pub extra: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub optimizer: Option<AdamState<f32>>,
    pub meta: CheckpointMeta,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the payload.
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct OptimizerHeader {
    hyper: AdamHyper,
    step: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    config: ModelConfig,
    meta: CheckpointMeta,
    optimizer: Option<OptimizerHeader>,
    tensors: Vec<TensorEntry>,
}

fn checksum(payload: &[u8]) -> u64 {
    let digest = Sha256::digest(payload);
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn format_err(path: &Path, what: impl std::fmt::Display) -> Error {
    Error::Format(format!("{}: {what}", path.display()))
}

/// Serializes `checkpoint` to bytes.
pub fn encode_checkpoint(checkpoint: &Checkpoint) -> Result<Vec<u8>> {
    let mut named: Vec<(String, &Tensor<f32>)> =
        checkpoint.params.parameters().iter().map(|p| (p.name.clone(), &p.value)).collect();
    if let Some(opt) = &checkpoint.optimizer {
        if opt.first_moment.len() != named.len() {
            return Err(Error::dim("optimizer state does not match parameter list"));
        }
        let names: Vec<String> = named.iter().map(|(n, _)| n.clone()).collect();
        for (n, m) in names.iter().zip(&opt.first_moment) {
            named.push((format!("{FIRST_MOMENT}{n}"), m));
        }
        for (n, v) in names.iter().zip(&opt.second_moment) {
            named.push((format!("{SECOND_MOMENT}{n}"), v));
        }
    }

    let mut payload = Vec::with_capacity(named.iter().map(|(_, t)| t.len() * 4).sum());
    let mut tensors = Vec::with_capacity(named.len());
    for (name, t) in named {
        tensors.push(TensorEntry { name, shape: t.shape().to_vec(), offset: payload.len() as u64 });
        for v in t.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = Header {
        version: FORMAT_VERSION,
        config: checkpoint.params.config().clone(),
        meta: checkpoint.meta.clone(),
        optimizer: checkpoint.optimizer.as_ref().map(|o| OptimizerHeader { hyper: o.hyper, step: o.step }),
        tensors,
    };
    let header = serde_json::to_vec(&header)?;

    let mut out = Vec::with_capacity(6 + 8 + header.len() + payload.len() + 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&checksum(&payload).to_le_bytes());
    Ok(out)
}

/// Parses bytes written by [`encode_checkpoint`]. `path` is only used in errors.
pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    if bytes.len() < 6 + 8 || &bytes[..6] != CHECKPOINT_MAGIC {
        return Err(format_err(path, "missing MTRNN1 magic"));
    }
    let header_len = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes")) as usize;
    let header_end = 14usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| format_err(path, "header length exceeds file size"))?;
    let header: Header = serde_json::from_slice(&bytes[14..header_end])
        .map_err(|e| format_err(path, format!("corrupted header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::Version { expected: FORMAT_VERSION, found: header.version });
    }
    if bytes.len() < header_end + 8 {
        return Err(format_err(path, "truncated file"));
    }
    let payload = &bytes[header_end..bytes.len() - 8];
    let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().expect("8 bytes"));
    if stored != checksum(payload) {
        return Err(Error::Integrity { path: path.to_path_buf(), reason: "payload checksum mismatch".into() });
    }

    let mut params = Vec::new();
    let mut first = Vec::new();
    let mut second = Vec::new();
    for entry in header.tensors {
        let count: usize = entry.shape.iter().product();
        let start = entry.offset as usize;
        let end = start
            .checked_add(count * 4)
            .filter(|&e| e <= payload.len())
            .ok_or_else(|| format_err(path, format!("tensor `{}` runs past the payload", entry.name)))?;
        let data = payload[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let value = Tensor::new(entry.shape, data)?;
        if let Some(name) = entry.name.strip_prefix(FIRST_MOMENT) {
            first.push((name.to_string(), value));
        } else if let Some(name) = entry.name.strip_prefix(SECOND_MOMENT) {
            second.push((name.to_string(), value));
        } else {
            params.push(Parameter::new(entry.name, value));
        }
    }
    let params = ModelParams::from_parameters(header.config, params)?;

    let optimizer = match header.optimizer {
        None => None,
        Some(opt) => {
            let names: Vec<&str> = params.parameters().iter().map(|p| p.name.as_str()).collect();
            let ordered = |list: Vec<(String, Tensor<f32>)>| -> Result<Vec<Tensor<f32>>> {
                if list.len() != names.len() || list.iter().zip(&names).any(|((n, _), m)| n != m) {
                    return Err(format_err(path, "optimizer moments do not match parameters"));
                }
                Ok(list.into_iter().map(|(_, t)| t).collect())
            };
            Some(AdamState {
                hyper: opt.hyper,
                step: opt.step,
                first_moment: ordered(first)?,
                second_moment: ordered(second)?,
            })
        }
    };
    Ok(Checkpoint { params, optimizer, meta: header.meta })
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(checkpoint)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_model;

    fn sample() -> Checkpoint {
        let cfg = ModelConfig { base_channels: 4, resblocks_per_stage: 1, ..ModelConfig::desk() };
        let params = init_model(&cfg, 9).unwrap();
        let mut opt = AdamState::new(params.parameters(), AdamHyper::default());
        opt.step = 3;
        opt.first_moment[0].data_mut()[0] = 0.25;
        Checkpoint { params, optimizer: Some(opt), meta: CheckpointMeta { step: 3, seed: 9, extra: serde_json::json!({"k": 1}) } }
    }

    #[test]
    fn round_trip_is_exact() {
        let ck = sample();
        let bytes = encode_checkpoint(&ck).unwrap();
        assert_eq!(decode_checkpoint(&bytes, Path::new("x")).unwrap(), ck);
        let bare = Checkpoint { optimizer: None, ..ck };
        let bytes = encode_checkpoint(&bare).unwrap();
        assert_eq!(decode_checkpoint(&bytes, Path::new("x")).unwrap(), bare);
    }

    #[test]
    fn corrupted_header_is_a_format_error() {
        let mut bytes = encode_checkpoint(&sample()).unwrap();
        bytes[15] = b'#';
        assert!(matches!(decode_checkpoint(&bytes, Path::new("x")), Err(Error::Format(_))));
        let mut bad_magic = encode_checkpoint(&sample()).unwrap();
        bad_magic[0] = b'X';
        assert!(matches!(decode_checkpoint(&bad_magic, Path::new("x")), Err(Error::Format(_))));
    }

    #[test]
    fn truncation_and_payload_damage_are_detected() {
        let bytes = encode_checkpoint(&sample()).unwrap();
        assert!(decode_checkpoint(&bytes[..bytes.len() - 20], Path::new("x")).is_err());
        let mut flipped = bytes.clone();
        let n = flipped.len();
        flipped[n - 12] ^= 1;
        assert!(matches!(decode_checkpoint(&flipped, Path::new("x")), Err(Error::Integrity { .. })));
    }
}
