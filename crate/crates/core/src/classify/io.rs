//! Model file: `b"ADRM"`, then little-endian `u32` format version, hidden
//! width `H` and class count `K`, then every parameter as a little-endian
//! `f64` in the flat layout order of [`ResidualHead`].

use std::path::Path;

use super::model::ResidualHead;
use super::ClassifyError;
use crate::synth::K;

pub const MAGIC: &[u8; 4] = b"ADRM";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn encode_model(model: &ResidualHead) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + model.params().len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.hidden() as u32).to_le_bytes());
    out.extend_from_slice(&(K as u32).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn decode_model(bytes: &[u8]) -> Result<ResidualHead, ClassifyError> {
    if bytes.len() < 4 {
        return Err(ClassifyError::TruncatedFile { expected: HEADER_LEN, actual: bytes.len() });
    }
    if &bytes[..4] != MAGIC {
        return Err(ClassifyError::BadMagic(bytes[..4].try_into().expect("4 bytes")));
    }
    if bytes.len() < HEADER_LEN {
        return Err(ClassifyError::TruncatedFile { expected: HEADER_LEN, actual: bytes.len() });
    }
    let version = u32_at(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(ClassifyError::VersionMismatch { found: version, supported: FORMAT_VERSION });
    }
    let hidden = u32_at(bytes, 8) as usize;
    let classes = u32_at(bytes, 12) as usize;
    if classes != K || hidden == 0 {
        return Err(ClassifyError::Incompatible(format!("hidden {hidden}, classes {classes}")));
    }
    let expected = HEADER_LEN + ResidualHead::param_count(hidden) * 8;
    if bytes.len() < expected {
        return Err(ClassifyError::TruncatedFile { expected, actual: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(ClassifyError::Incompatible(format!("{} trailing bytes", bytes.len() - expected)));
    }
    let params = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    ResidualHead::from_params(hidden, params).ok_or_else(|| ClassifyError::Incompatible("non-finite weights".into()))
}

pub fn save_model(model: &ResidualHead, path: impl AsRef<Path>) -> Result<(), ClassifyError> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(model)).map_err(|e| ClassifyError::Io(path.to_path_buf(), e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ResidualHead, ClassifyError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| ClassifyError::Io(path.to_path_buf(), e))?;
    decode_model(&bytes)
}
