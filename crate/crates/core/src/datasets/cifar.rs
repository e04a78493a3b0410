//! CIFAR-10 binary version reader.
//!
//! Each record is one label byte followed by 3072 pixel bytes: the red,
//! green and blue 32x32 planes in that order, each row-major. Pixels are
//! re-ordered to interleaved (row, col, channel) on load so that a spatial
//! patch maps to a contiguous run of channels.

use std::fs;
use std::path::Path;

use super::{ImageDims, RawDataset, Split};
use crate::error::{Error, Result};

pub const SIDE: usize = 32;
pub const CHANNELS: usize = 3;
pub const PLANE: usize = SIDE * SIDE;
pub const RECORD: usize = 1 + CHANNELS * PLANE;

pub fn from_bytes(bytes: &[u8], split: Split) -> Result<RawDataset> {
    if !bytes.len().is_multiple_of(RECORD) {
        let complete = bytes.len() / RECORD;
        return Err(Error::Format {
            field: "record",
            offset: (complete * RECORD) as u64,
            message: format!(
                "truncated in record {complete}: file length {} is not a multiple of {RECORD}",
                bytes.len()
            ),
        });
    }
    let n = bytes.len() / RECORD;
    let mut labels = Vec::with_capacity(n);
    let mut pixels = vec![0u8; n * CHANNELS * PLANE];
    for (r, record) in bytes.chunks_exact(RECORD).enumerate() {
        let label = record[0];
        if label > 9 {
            return Err(Error::Format {
                field: "label",
                offset: (r * RECORD) as u64,
                message: format!("label {label} outside 0..=9 in record {r}"),
            });
        }
        labels.push(label);
        let dst = &mut pixels[r * CHANNELS * PLANE..(r + 1) * CHANNELS * PLANE];
        for ch in 0..CHANNELS {
            let plane = &record[1 + ch * PLANE..1 + (ch + 1) * PLANE];
            for (p, &v) in plane.iter().enumerate() {
                dst[p * CHANNELS + ch] = v;
            }
        }
    }
    RawDataset::new(pixels, labels, ImageDims::new(SIDE, SIDE, CHANNELS), split)
}

/// Loads one CIFAR-10 batch file.
pub fn load_cifar10(path: &Path, split: Split) -> Result<RawDataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, split)
}

/// Loads and concatenates several batch files.
pub fn load_batches(paths: &[impl AsRef<Path>], split: Split) -> Result<RawDataset> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for p in paths {
        let part = load_cifar10(p.as_ref(), split)?;
        pixels.extend_from_slice(&part.images);
        labels.extend_from_slice(&part.labels);
    }
    RawDataset::new(pixels, labels, ImageDims::new(SIDE, SIDE, CHANNELS), split)
}
