//! Dataset ingestion and artifact persistence.
//!
//! * point bins: little-endian `f32` quadruples `(x, y, z, intensity)`
//! * labels: one box per line, `x y z l w h heading [conf]`, `#` comments
//! * PLY: `binary_little_endian 1.0` with `x, y, z, intensity` as `float`
//! * manifests: JSON

mod labels;
mod manifest;
mod obj;
mod ply;
mod points;

use std::path::{Path, PathBuf};

pub use labels::{format_labels, parse_labels, read_labels, write_labels, Label};
pub use manifest::{DatasetManifest, FrameEntry};
pub use obj::{parse_obj, read_obj, write_obj};
pub use ply::{
    encode_ply, read_ply, read_ply_mesh, read_ply_points, write_ply, PlyData, PlyElement,
};
pub use points::{
    apply_ground_shift, crop_to_range, encode_point_bin, read_point_bin, write_point_bin, RangeCrop,
};

use crate::geom::{MeshCleanReport, TriangleMesh};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: size {len} bytes is not a multiple of 16")]
    TruncatedFile { path: PathBuf, len: u64 },
    #[error("{path}: record {record} holds a non-finite value")]
    NonFiniteValue { path: PathBuf, record: usize },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(path: &Path, message: impl Into<String>) -> Self {
        Self::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|e| IoError::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

/// Loads an OBJ or PLY mesh, chosen by extension. Degenerate triangles are dropped
/// and counted in the report.
pub fn read_mesh(path: impl AsRef<Path>) -> Result<(TriangleMesh, MeshCleanReport), IoError> {
    let path = path.as_ref();
    let (vertices, faces) = match extension(path).as_str() {
        "obj" => read_obj(path)?,
        "ply" => read_ply_mesh(path)?,
        other => {
            return Err(IoError::format(
                path,
                format!("unsupported mesh extension `{other}`"),
            ))
        }
    };
    TriangleMesh::new(vertices, faces).map_err(|e| IoError::format(path, e.to_string()))
}

pub(crate) fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}
