//! IDX reader (the MNIST distribution format).
//!
//! ```text
//! images: 0x00000803 | N | rows | cols | N*rows*cols bytes (row-major)
//! labels: 0x00000801 | N | N bytes
//! ```
//! All header words are big-endian `u32`.

use std::fs;
use std::path::Path;

use super::{ImageDims, RawDataset, Split};
use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize, field: &'static str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format {
            field,
            offset: offset as u64,
            message: format!("header truncated: file has {} bytes", bytes.len()),
        })
}

/// Parsed IDX image file: pixel bytes plus `(n, rows, cols)`.
#[derive(Debug, Clone)]
pub struct IdxImages {
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

pub fn parse_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = read_u32(bytes, 0, "magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format {
            field: "magic",
            offset: 0,
            message: format!("expected 0x{IMAGE_MAGIC:08x} for an image file, found 0x{magic:08x}"),
        });
    }
    let n = read_u32(bytes, 4, "count")? as usize;
    let rows = read_u32(bytes, 8, "rows")? as usize;
    let cols = read_u32(bytes, 12, "cols")? as usize;
    let record = rows * cols;
    let header = 16;
    let expected = header + n * record;
    if bytes.len() < expected {
        // Report the first record that cannot be read completely.
        let available = bytes.len() - header;
        let record_index = available.checked_div(record).unwrap_or(0);
        let record_offset = header + record_index * record;
        return Err(Error::Format {
            field: "pixels",
            offset: record_offset as u64,
            message: format!(
                "truncated in record {record_index}: record needs {record} bytes from offset \
                 {record_offset}, file ends at byte {} (expected {expected} bytes)",
                bytes.len()
            ),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Format {
            field: "pixels",
            offset: expected as u64,
            message: format!("{} trailing bytes after the last record", bytes.len() - expected),
        });
    }
    Ok(IdxImages {
        n,
        rows,
        cols,
        pixels: bytes[header..].to_vec(),
    })
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0, "magic")?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format {
            field: "magic",
            offset: 0,
            message: format!("expected 0x{LABEL_MAGIC:08x} for a label file, found 0x{magic:08x}"),
        });
    }
    let n = read_u32(bytes, 4, "count")? as usize;
    let expected = 8 + n;
    if bytes.len() != expected {
        return Err(Error::Format {
            field: "labels",
            offset: bytes.len().min(expected) as u64,
            message: format!("expected {expected} bytes for {n} labels, file has {}", bytes.len()),
        });
    }
    let labels = bytes[8..].to_vec();
    if let Some(pos) = labels.iter().position(|&l| l > 9) {
        return Err(Error::Format {
            field: "labels",
            offset: (8 + pos) as u64,
            message: format!("label {} outside 0..=9", labels[pos]),
        });
    }
    Ok(labels)
}

/// Combines an image and a label file into one dataset.
pub fn from_bytes(images: &[u8], labels: &[u8], split: Split) -> Result<RawDataset> {
    let imgs = parse_images(images)?;
    let labels = parse_labels(labels)?;
    if labels.len() != imgs.n {
        return Err(Error::Format {
            field: "count",
            offset: 4,
            message: format!(
                "image file holds {} records but label file holds {}",
                imgs.n,
                labels.len()
            ),
        });
    }
    RawDataset::new(
        imgs.pixels,
        labels,
        ImageDims::new(imgs.rows, imgs.cols, 1),
        split,
    )
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads an IDX image/label file pair.
pub fn load_idx(images: &Path, labels: &Path, split: Split) -> Result<RawDataset> {
    from_bytes(&read(images)?, &read(labels)?, split)
}
