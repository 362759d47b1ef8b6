//! Model checkpoint format.
//!
//! Layout: 8-byte magic, u32 version, one aggregation tag byte, u32 dim,
//! u32 iterations, then every tensor as f32 little-endian in canonical
//! order (row-major within each tensor), then a SHA-256 digest of all
//! preceding bytes. Loads verify structure and digest before building
//! parameters, so a loaded model is bitwise what was saved.

use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::params::{assemble, tensor_specs, Aggregation, ModelParams};
use ndarray::Array2;

const MAGIC: &[u8; 8] = b"SATKITNN";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 1 + 4 + 4;
const DIGEST_LEN: usize = 32;
/// Caps keeping payload sizes sane on any platform.
const MAX_DIM: u32 = 65_536;
const MAX_ITERATIONS: u32 = 1_000_000;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a model checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {version}")]
    UnsupportedVersion { version: u32 },
    #[error("unknown aggregation tag {tag}")]
    BadAggregationTag { tag: u8 },
    #[error("implausible model shape: dim {dim}, iterations {iterations}")]
    BadShape { dim: u32, iterations: u32 },
    #[error("checkpoint is shorter than its declared payload")]
    Truncated,
    #[error("{extra} bytes after the checksum trailer")]
    TrailingBytes { extra: usize },
    #[error("checksum mismatch; checkpoint is corrupt")]
    ChecksumMismatch,
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn aggregation_tag(aggregation: Aggregation) -> u8 {
    match aggregation {
        Aggregation::Mean => 0,
        Aggregation::Attention => 1,
    }
}

/// Serialize parameters to the checkpoint byte format.
pub fn encode_checkpoint(params: &ModelParams) -> Vec<u8> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.push(aggregation_tag(params.aggregation));
    bytes.extend_from_slice(&(params.dim as u32).to_le_bytes());
    bytes.extend_from_slice(&(params.iterations as u32).to_le_bytes());
    for tensor in params.flat() {
        for &v in tensor.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&bytes);
    bytes.extend_from_slice(&digest);
    bytes
}

/// Parse and verify a checkpoint byte buffer.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams, CheckpointError> {
    if bytes.len() < HEADER_LEN + DIGEST_LEN {
        return Err(CheckpointError::Truncated);
    }
    if &bytes[..8] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion { version });
    }
    let aggregation = match bytes[12] {
        0 => Aggregation::Mean,
        1 => Aggregation::Attention,
        tag => return Err(CheckpointError::BadAggregationTag { tag }),
    };
    let dim = u32::from_le_bytes(bytes[13..17].try_into().unwrap());
    let iterations = u32::from_le_bytes(bytes[17..21].try_into().unwrap());
    if dim == 0 || dim > MAX_DIM || iterations == 0 || iterations > MAX_ITERATIONS {
        return Err(CheckpointError::BadShape { dim, iterations });
    }

    let specs = tensor_specs(dim as usize, aggregation);
    let payload: usize = specs.iter().map(|s| s.rows * s.cols * 4).sum();
    let expected = HEADER_LEN + payload + DIGEST_LEN;
    if bytes.len() < expected {
        return Err(CheckpointError::Truncated);
    }
    if bytes.len() > expected {
        return Err(CheckpointError::TrailingBytes {
            extra: bytes.len() - expected,
        });
    }
    let digest = Sha256::digest(&bytes[..expected - DIGEST_LEN]);
    if digest.as_slice() != &bytes[expected - DIGEST_LEN..] {
        return Err(CheckpointError::ChecksumMismatch);
    }

    let mut offset = HEADER_LEN;
    let tensors = specs
        .iter()
        .map(|spec| {
            let values: Vec<f32> = bytes[offset..offset + spec.rows * spec.cols * 4]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            offset += spec.rows * spec.cols * 4;
            Array2::from_shape_vec((spec.rows, spec.cols), values)
                .expect("length matches the spec shape")
        })
        .collect();
    Ok(assemble(
        dim as usize,
        iterations as usize,
        aggregation,
        tensors,
    ))
}

/// Write a checkpoint file.
pub fn save_checkpoint(params: &ModelParams, path: &Path) -> io::Result<()> {
    std::fs::write(path, encode_checkpoint(params))
}

/// Read and verify a checkpoint file.
pub fn load_checkpoint(path: &Path) -> Result<ModelParams, CheckpointError> {
    decode_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(aggregation: Aggregation) -> ModelParams {
        ModelParams::init(6, 4, aggregation, 77)
    }

    /// Recompute the trailer after editing header bytes, so structural
    /// errors are observed rather than checksum failures.
    fn reseal(mut bytes: Vec<u8>) -> Vec<u8> {
        let n = bytes.len() - DIGEST_LEN;
        let digest = Sha256::digest(&bytes[..n]);
        bytes[n..].copy_from_slice(&digest);
        bytes
    }

    #[test]
    fn round_trip_is_bitwise_identical() {
        for aggregation in [Aggregation::Mean, Aggregation::Attention] {
            let params = sample(aggregation);
            let bytes = encode_checkpoint(&params);
            let decoded = decode_checkpoint(&bytes).unwrap();
            assert_eq!(decoded, params);
            assert_eq!(encode_checkpoint(&decoded), bytes);
        }
    }

    #[test]
    fn header_fields_survive_the_round_trip() {
        let decoded = decode_checkpoint(&encode_checkpoint(&sample(Aggregation::Attention))).unwrap();
        assert_eq!(decoded.dim, 6);
        assert_eq!(decoded.iterations, 4);
        assert_eq!(decoded.aggregation, Aggregation::Attention);
        assert!(decoded.q_l.is_some() && decoded.q_c.is_some());
    }

    #[test]
    fn file_round_trip_matches_memory() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let params = sample(Aggregation::Mean);
        save_checkpoint(&params, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), params);
    }

    #[test]
    fn any_truncation_is_rejected() {
        let bytes = encode_checkpoint(&sample(Aggregation::Mean));
        for len in [0, 5, HEADER_LEN, HEADER_LEN + 40, bytes.len() - 1] {
            assert!(
                matches!(
                    decode_checkpoint(&bytes[..len]),
                    Err(CheckpointError::Truncated)
                ),
                "prefix of {len} bytes"
            );
        }
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let mut bytes = encode_checkpoint(&sample(Aggregation::Mean));
        bytes.push(0);
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(CheckpointError::TrailingBytes { extra: 1 })
        ));
    }

    #[test]
    fn payload_corruption_fails_the_checksum() {
        let mut bytes = encode_checkpoint(&sample(Aggregation::Mean));
        bytes[HEADER_LEN + 3] ^= 0x40;
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(CheckpointError::ChecksumMismatch)
        ));
    }

    #[test]
    fn foreign_files_are_rejected_by_magic() {
        let mut bytes = encode_checkpoint(&sample(Aggregation::Mean));
        bytes[0] = b'X';
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(CheckpointError::BadMagic)
        ));
    }

    #[test]
    fn future_versions_are_rejected() {
        let mut bytes = encode_checkpoint(&sample(Aggregation::Mean));
        bytes[8] = 2;
        let bytes = reseal(bytes);
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(CheckpointError::UnsupportedVersion { version: 2 })
        ));
    }

    #[test]
    fn unknown_aggregation_tags_are_rejected() {
        let mut bytes = encode_checkpoint(&sample(Aggregation::Mean));
        bytes[12] = 7;
        let bytes = reseal(bytes);
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(CheckpointError::BadAggregationTag { tag: 7 })
        ));
    }

    #[test]
    fn zero_dim_headers_are_rejected() {
        let mut bytes = encode_checkpoint(&sample(Aggregation::Mean));
        bytes[13..17].copy_from_slice(&0u32.to_le_bytes());
        let bytes = reseal(bytes);
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(CheckpointError::BadShape { dim: 0, .. })
        ));
    }
}
