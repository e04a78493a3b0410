//! `SBNW1` tensor checkpoints and `key = value` metadata sidecars.
//!
//! Checkpoint layout:
//!
//! ```text
//! SBNW1\n
//! <name>\n              one block per tensor, repeated until EOF
//! <d0> <d1> ...\n       dimensions, space separated (empty line = scalar)
//! <prod(d) × f64>       row-major, little-endian IEEE-754
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

pub const MAGIC: &[u8] = b"SBNW1\n";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn from_matrix(name: impl Into<String>, m: &Array2<f64>) -> Self {
        Tensor {
            name: name.into(),
            dims: vec![m.nrows(), m.ncols()],
            data: m.iter().copied().collect(),
        }
    }

    pub fn from_vector(name: impl Into<String>, v: &Array1<f64>) -> Self {
        Tensor {
            name: name.into(),
            dims: vec![v.len()],
            data: v.to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Result<Array2<f64>> {
        if self.dims.len() != 2 {
            return Err(Error::Dimension {
                what: "tensor rank",
                expected: 2,
                actual: self.dims.len(),
            });
        }
        Ok(Array2::from_shape_vec((self.dims[0], self.dims[1]), self.data.clone()).expect("checked size"))
    }

    pub fn to_vector(&self) -> Result<Array1<f64>> {
        if self.dims.len() != 1 {
            return Err(Error::Dimension {
                what: "tensor rank",
                expected: 1,
                actual: self.dims.len(),
            });
        }
        Ok(Array1::from(self.data.clone()))
    }
}

pub fn encode(tensors: &[Tensor]) -> Result<Vec<u8>> {
    let mut out = MAGIC.to_vec();
    for t in tensors {
        if t.name.is_empty() || t.name.contains('\n') {
            return Err(Error::argument("name", format!("invalid tensor name {:?}", t.name)));
        }
        let count: usize = t.dims.iter().product();
        if count != t.data.len() {
            return Err(Error::Dimension {
                what: "tensor data",
                expected: count,
                actual: t.data.len(),
            });
        }
        out.extend_from_slice(t.name.as_bytes());
        out.push(b'\n');
        let dims: Vec<String> = t.dims.iter().map(|d| d.to_string()).collect();
        out.extend_from_slice(dims.join(" ").as_bytes());
        out.push(b'\n');
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn read_line<'a>(bytes: &'a [u8], pos: &mut usize, field: &'static str) -> Result<&'a str> {
    let start = *pos;
    let end = bytes[start..]
        .iter()
        .position(|&b| b == b'\n')
        .map(|i| start + i)
        .ok_or_else(|| Error::Format {
            field,
            offset: start as u64,
            message: "missing newline".into(),
        })?;
    *pos = end + 1;
    std::str::from_utf8(&bytes[start..end]).map_err(|_| Error::Format {
        field,
        offset: start as u64,
        message: "not valid UTF-8".into(),
    })
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Tensor>> {
    if !bytes.starts_with(MAGIC) {
        return Err(Error::Format {
            field: "magic",
            offset: 0,
            message: "missing SBNW1 header".into(),
        });
    }
    let mut pos = MAGIC.len();
    let mut tensors = Vec::new();
    while pos < bytes.len() {
        let name = read_line(bytes, &mut pos, "name")?.to_string();
        let dims_at = pos;
        let dims_line = read_line(bytes, &mut pos, "dims")?;
        let dims = dims_line
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format {
                field: "dims",
                offset: dims_at as u64,
                message: e.to_string(),
            })?;
        let count: usize = dims.iter().product();
        let need = count * 8;
        if bytes.len() - pos < need {
            return Err(Error::Format {
                field: "data",
                offset: pos as u64,
                message: format!("tensor `{name}` needs {need} bytes, {} left", bytes.len() - pos),
            });
        }
        let data = bytes[pos..pos + need]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        pos += need;
        tensors.push(Tensor { name, dims, data });
    }
    Ok(tensors)
}

pub fn save(path: &Path, tensors: &[Tensor]) -> Result<()> {
    fs::write(path, encode(tensors)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Vec<Tensor>> {
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn find<'a>(tensors: &'a [Tensor], name: &str) -> Result<&'a Tensor> {
    tensors.iter().find(|t| t.name == name).ok_or_else(|| Error::Format {
        field: "name",
        offset: 0,
        message: format!("tensor `{name}` not present"),
    })
}

/// Flat `key = value` text; `#` starts a comment line.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::config(format!("line {}", n + 1), format!("expected `key = value`, got `{line}`"))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

pub fn format_key_values<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut s = String::new();
    for (k, v) in pairs {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(&v);
        s.push('\n');
    }
    s
}
