//! Binary tensor interchange format with a JSON sidecar.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   4 bytes  "LOBT"
//! version u16      1
//! dtype   u8       1 = f32, 2 = f64
//! rank    u8
//! dims    rank x u64
//! payload product(dims) x element size, row-major
//! ```
//!
//! The sidecar lives next to the tensor as `<file>.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::write_atomic;

pub const MAGIC: &[u8; 4] = b"LOBT";
pub const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not a tensor file (bad magic)")]
    BadMagic,
    #[error("unsupported tensor version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown dtype code {0}")]
    BadDtype(u8),
    #[error("payload holds {got} bytes, header implies {expected}")]
    Truncated { expected: usize, got: usize },
    #[error("shape {dims:?} does not match {len} values")]
    Shape { dims: Vec<usize>, len: usize },
    #[error("sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TensorError + '_ {
    move |source| TensorError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn code(&self) -> u8 {
        match self {
            TensorData::F32(_) => 1,
            TensorData::F64(_) => 2,
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            TensorData::F32(v) => v.iter().map(|x| f64::from(*x)).collect(),
            TensorData::F64(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self, TensorError> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(TensorError::Shape { dims, len: data.len() });
        }
        Ok(Self { dims, data })
    }

    /// Narrows to f32, the interchange dtype.
    pub fn from_f64_as_f32(dims: Vec<usize>, values: &[f64]) -> Result<Self, TensorError> {
        Self::new(dims, TensorData::F32(values.iter().map(|v| *v as f32).collect()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.dims.len() + 8 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.data.code());
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TensorError> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(TensorError::BadMagic);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(TensorError::UnsupportedVersion(version));
        }
        let code = bytes[6];
        let width = match code {
            1 => 4,
            2 => 8,
            c => return Err(TensorError::BadDtype(c)),
        };
        let rank = bytes[7] as usize;
        let header = 8 + 8 * rank;
        if bytes.len() < header {
            return Err(TensorError::Truncated { expected: header, got: bytes.len() });
        }
        let dims: Vec<usize> = bytes[8..header]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let count: usize = dims.iter().product();
        let payload = &bytes[header..];
        if payload.len() != count * width {
            return Err(TensorError::Truncated { expected: count * width, got: payload.len() });
        }
        let data = if code == 1 {
            TensorData::F32(payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
        } else {
            TensorData::F64(payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        Ok(Self { dims, data })
    }

    pub fn write(&self, path: &Path) -> Result<(), TensorError> {
        write_atomic(path, &self.to_bytes()).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self, TensorError> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        Self::from_bytes(&bytes)
    }
}

/// Metadata stored beside a tensor file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Sidecar {
    /// `features`, `labels` or `checkpoint`.
    pub kind: String,
    pub scheme: Option<String>,
    pub split: Option<String>,
    pub paradigm: Option<String>,
    /// Label tensor path, relative to the sidecar's directory.
    pub label_file: Option<String>,
    pub shape: Vec<usize>,
    pub levels: Option<usize>,
    pub tick_size: Option<f64>,
    pub window: Option<crate::represent::WindowConfig>,
    pub label: Option<crate::label::LabelConfig>,
    /// Class index order of label tensors.
    pub classes: Vec<String>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

pub fn sidecar_path(tensor: &Path) -> PathBuf {
    let mut s = tensor.as_os_str().to_os_string();
    s.push(".json");
    PathBuf::from(s)
}

impl Sidecar {
    pub fn write(&self, tensor: &Path) -> Result<(), TensorError> {
        let path = sidecar_path(tensor);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(&path, text.as_bytes()).map_err(io_err(&path))
    }

    pub fn read(tensor: &Path) -> Result<Self, TensorError> {
        let path = sidecar_path(tensor);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Absolute path of the referenced label tensor, if any.
    pub fn resolve_label_file(&self, tensor: &Path) -> Option<PathBuf> {
        let dir = tensor.parent().unwrap_or(Path::new("."));
        self.label_file.as_ref().map(|f| dir.join(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let t = Tensor::new(vec![2, 1], TensorData::F32(vec![1.0, -2.5])).unwrap();
        let b = t.to_bytes();
        assert_eq!(&b[..4], b"LOBT");
        assert_eq!(&b[4..8], &[1, 0, 1, 2]);
        assert_eq!(&b[8..16], &2u64.to_le_bytes());
        assert_eq!(b.len(), 8 + 16 + 8);
        assert_eq!(&b[24..28], &1.0f32.to_le_bytes());
        assert_eq!(Tensor::from_bytes(&b).unwrap(), t);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Tensor::from_bytes(b"NOPE0000"), Err(TensorError::BadMagic)));
        let mut b = Tensor::new(vec![3], TensorData::F64(vec![1.0, 2.0, 3.0])).unwrap().to_bytes();
        b.pop();
        assert!(matches!(Tensor::from_bytes(&b), Err(TensorError::Truncated { .. })));
        b[6] = 9;
        assert!(matches!(Tensor::from_bytes(&b), Err(TensorError::BadDtype(9))));
        assert!(Tensor::new(vec![2, 2], TensorData::F32(vec![0.0])).is_err());
    }

    #[test]
    fn file_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.lobt");
        let values: Vec<f32> = (0..60).map(|i| (i as f32).sin() * 1e3 + f32::EPSILON).collect();
        let t = Tensor::new(vec![3, 4, 5], TensorData::F32(values)).unwrap();
        t.write(&path).unwrap();
        let sc = Sidecar { kind: "features".into(), scheme: Some("mw".into()), label_file: Some("y.lobt".into()), ..Default::default() };
        sc.write(&path).unwrap();
        let back = Tensor::read(&path).unwrap();
        assert_eq!(back.to_bytes(), t.to_bytes());
        let sc2 = Sidecar::read(&path).unwrap();
        assert_eq!(sc2, sc);
        assert_eq!(sc2.resolve_label_file(&path).unwrap(), dir.path().join("y.lobt"));
    }
}
