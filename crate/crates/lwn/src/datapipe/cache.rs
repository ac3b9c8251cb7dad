//! Binary dataset cache: a model-file-style header plus the raw matrix.
//!
//! Layout (integers little-endian): magic "LWD1", version u16, n u32,
//! d u32, class count u32, one kind byte per column, n label u32s, the
//! feature matrix as n*d little-endian f64s, provenance strings (u16 count,
//! each u32 length + UTF-8), CRC-32 trailer. Lossless round trip.

use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::linalg::Mat;
use crate::store::crc32;

use super::{one_hot_targets, DataSet, FeatureKind};

pub const MAGIC: [u8; 4] = *b"LWD1";
pub const VERSION: u16 = 1;

fn kind_byte(kind: FeatureKind) -> u8 {
    match kind {
        FeatureKind::Continuous => 0,
        FeatureKind::Binary => 1,
        FeatureKind::CategoricalExpanded => 2,
    }
}

fn kind_from_byte(b: u8) -> std::result::Result<FeatureKind, FormatError> {
    match b {
        0 => Ok(FeatureKind::Continuous),
        1 => Ok(FeatureKind::Binary),
        2 => Ok(FeatureKind::CategoricalExpanded),
        other => Err(FormatError::InvalidHeader(format!(
            "unknown feature kind byte {other}"
        ))),
    }
}

pub fn encode_dataset(ds: &DataSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.len() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.n_classes as u32).to_le_bytes());
    for &k in &ds.feature_kinds {
        out.push(kind_byte(k));
    }
    for &l in &ds.labels {
        out.extend_from_slice(&(l as u32).to_le_bytes());
    }
    for v in ds.x.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(ds.provenance.len() as u16).to_le_bytes());
    for p in &ds.provenance {
        out.extend_from_slice(&(p.len() as u32).to_le_bytes());
        out.extend_from_slice(p.as_bytes());
    }
    let crc = crc32(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn decode_dataset(bytes: &[u8]) -> Result<DataSet> {
    if bytes.len() < 4 + 2 + 12 + 4 {
        return Err(FormatError::Truncated {
            needed: 22,
            available: bytes.len(),
        }
        .into());
    }
    if bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic {
            found: bytes[..4].try_into().unwrap(),
            expected: MAGIC,
        }
        .into());
    }
    let (payload, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    let computed = crc32(payload);
    if stored != computed {
        return Err(FormatError::CrcMismatch { stored, computed }.into());
    }

    let mut pos = 4usize;
    let mut take = |n: usize| -> std::result::Result<&[u8], FormatError> {
        if pos + n > payload.len() {
            return Err(FormatError::Truncated {
                needed: pos + n,
                available: payload.len(),
            });
        }
        let s = &payload[pos..pos + n];
        pos += n;
        Ok(s)
    };

    let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    let n = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let n_classes = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;

    let mut kinds = Vec::with_capacity(d);
    for &b in take(d)? {
        kinds.push(kind_from_byte(b)?);
    }
    let mut labels = Vec::with_capacity(n);
    for chunk in take(n * 4)?.chunks_exact(4) {
        labels.push(u32::from_le_bytes(chunk.try_into().unwrap()) as usize);
    }
    let mut data = Vec::with_capacity(n * d);
    for chunk in take(n * d * 8)?.chunks_exact(8) {
        data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    let prov_count = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
    let mut provenance = Vec::with_capacity(prov_count);
    for _ in 0..prov_count {
        let len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let s = std::str::from_utf8(take(len)?)
            .map_err(|e| Error::Data(format!("provenance is not UTF-8: {e}")))?;
        provenance.push(s.to_string());
    }
    if pos != payload.len() {
        return Err(FormatError::InvalidHeader(format!(
            "{} unexpected trailing bytes",
            payload.len() - pos
        ))
        .into());
    }

    let x = Mat::from_vec(n, d, data);
    let y = one_hot_targets(&labels, n_classes);
    Ok(DataSet {
        x,
        y,
        labels,
        n_classes,
        feature_kinds: kinds,
        provenance,
    })
}

pub fn write_dataset(path: &Path, ds: &DataSet) -> Result<()> {
    std::fs::write(path, encode_dataset(ds))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<DataSet> {
    decode_dataset(&std::fs::read(path)?)
}
