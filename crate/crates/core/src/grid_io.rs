//! Density grid files: one JSON header line followed by little-endian `f32`
//! values, checked by a SHA-256 digest of the payload.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mesh::StructuredMesh;

pub const FORMAT: &str = "topoagent-density/1";

#[derive(Debug, Error)]
pub enum GridError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("checksum mismatch: header {expected}, payload {actual}")]
    Checksum { expected: String, actual: String },
    #[error("header dims {dims:?} need {expected} values, payload holds {got}")]
    Dims { dims: [usize; 3], expected: usize, got: usize },
}

/// Element densities of a structured mesh, x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub dims: [usize; 3],
    pub extents: [f64; 3],
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    dims: [usize; 3],
    extents: [f64; 3],
    spacing: [f64; 3],
    count: usize,
    sha256: String,
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl DensityGrid {
    pub fn new(mesh: &StructuredMesh, values: &[f64]) -> Self {
        assert_eq!(values.len(), mesh.num_elements(), "one density per element");
        Self { dims: mesh.counts(), extents: mesh.extents(), values: values.iter().map(|v| *v as f32).collect() }
    }

    pub fn mesh(&self) -> Result<StructuredMesh, GridError> {
        let [nx, ny, nz] = self.dims;
        let [lx, ly, lz] = self.extents;
        StructuredMesh::new(nx, ny, nz, lx, ly, lz).map_err(|e| GridError::Header(e.to_string()))
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(|v| *v as f64).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        let header = Header {
            format: FORMAT.into(),
            dims: self.dims,
            extents: self.extents,
            spacing: [0, 1, 2].map(|a| self.extents[a] / self.dims[a] as f64),
            count: self.values.len(),
            sha256: digest(&payload),
        };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GridError> {
        let nl = bytes.iter().position(|b| *b == b'\n').ok_or_else(|| GridError::Header("missing header line".into()))?;
        let header: Header = serde_json::from_slice(&bytes[..nl]).map_err(|e| GridError::Header(e.to_string()))?;
        if header.format != FORMAT {
            return Err(GridError::Header(format!("unsupported format `{}`", header.format)));
        }
        let payload = &bytes[nl + 1..];
        let actual = digest(payload);
        if actual != header.sha256 {
            return Err(GridError::Checksum { expected: header.sha256, actual });
        }
        let expected = header.dims.iter().product::<usize>();
        let got = payload.len() / 4;
        if !payload.len().is_multiple_of(4) || got != expected || header.count != expected {
            return Err(GridError::Dims { dims: header.dims, expected, got });
        }
        let values = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Ok(Self { dims: header.dims, extents: header.extents, values })
    }

    pub fn save(&self, path: &Path) -> Result<(), GridError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|source| GridError::Io { path: dir.display().to_string(), source })?;
        }
        fs::write(path, self.to_bytes()).map_err(|source| GridError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, GridError> {
        let bytes = fs::read(path).map_err(|source| GridError::Io { path: path.display().to_string(), source })?;
        Self::from_bytes(&bytes)
    }
}
