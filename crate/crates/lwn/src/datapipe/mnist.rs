//! IDX-format image/label files (the MNIST container format).
//!
//! Big-endian, magic-typed: `0x00000803` for ubyte image tensors with three
//! dimensions, `0x00000801` for ubyte label vectors. Pixels are scaled to
//! [0, 1] by /255 and flattened row-major; labels become one-hot targets at
//! +-0.9.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Mat;

use super::{DataSet, FeatureKind};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(bytes: &[u8], pos: usize, what: &str) -> Result<u32> {
    bytes
        .get(pos..pos + 4)
        .map(|s| u32::from_be_bytes(s.try_into().unwrap()))
        .ok_or_else(|| Error::Data(format!("IDX file truncated reading {what}")))
}

/// Parses an IDX image file into (n, rows, cols, pixels).
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bytes = std::fs::read(path)?;
    let magic = read_u32_be(&bytes, 0, "magic")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Data(format!(
            "bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x} ({})",
            path.display()
        )));
    }
    let n = read_u32_be(&bytes, 4, "count")? as usize;
    let rows = read_u32_be(&bytes, 8, "rows")? as usize;
    let cols = read_u32_be(&bytes, 12, "cols")? as usize;
    let expected = 16 + n * rows * cols;
    if bytes.len() != expected {
        return Err(Error::Data(format!(
            "IDX image payload is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    Ok((n, rows, cols, bytes[16..].to_vec()))
}

/// Parses an IDX label file.
pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path)?;
    let magic = read_u32_be(&bytes, 0, "magic")?;
    if magic != LABELS_MAGIC {
        return Err(Error::Data(format!(
            "bad label magic {magic:#010x}, expected {LABELS_MAGIC:#010x} ({})",
            path.display()
        )));
    }
    let n = read_u32_be(&bytes, 4, "count")? as usize;
    if bytes.len() != 8 + n {
        return Err(Error::Data(format!(
            "IDX label payload is {} bytes, header implies {}",
            bytes.len(),
            8 + n
        )));
    }
    Ok(bytes[8..].to_vec())
}

/// Loads an IDX image/label pair: pixels scaled to [0, 1], flattened
/// row-major; one-hot targets at +-0.9.
pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<DataSet> {
    let (n, rows, cols, pixels) = read_idx_images(images_path)?;
    let labels_raw = read_idx_labels(labels_path)?;
    if labels_raw.len() != n {
        return Err(Error::Data(format!(
            "{n} images but {} labels",
            labels_raw.len()
        )));
    }
    let d = rows * cols;
    let mut x = Mat::zeros(n, d);
    for (v, &p) in x.as_mut_slice().iter_mut().zip(&pixels) {
        *v = p as f64 / 255.0;
    }
    let labels: Vec<usize> = labels_raw.iter().map(|&l| l as usize).collect();
    let n_classes = labels.iter().copied().max().map_or(2, |m| (m + 1).max(2));
    DataSet::from_features(
        x,
        labels,
        n_classes,
        vec![FeatureKind::Continuous; d],
        vec![format!(
            "load_mnist({}, {}) pixels/255",
            images_path.display(),
            labels_path.display()
        )],
    )
}

/// Writes images in IDX format (the exact MNIST layout).
pub fn write_idx_images(path: &Path, images: &[Vec<u8>], rows: usize, cols: usize) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + images.len() * rows * cols);
    bytes.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(images.len() as u32).to_be_bytes());
    bytes.extend_from_slice(&(rows as u32).to_be_bytes());
    bytes.extend_from_slice(&(cols as u32).to_be_bytes());
    for img in images {
        if img.len() != rows * cols {
            return Err(Error::Data(format!(
                "image has {} pixels, expected {}",
                img.len(),
                rows * cols
            )));
        }
        bytes.extend_from_slice(img);
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Writes labels in IDX format.
pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    std::fs::write(path, bytes)?;
    Ok(())
}
