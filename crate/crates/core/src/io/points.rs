use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_bytes, write_bytes, IoError};
use crate::frame::Frame;
use crate::geom::Point3;

const RECORD: usize = 16;

/// Reads a KITTI-style velodyne bin. The frame id is the file stem.
pub fn read_point_bin(path: impl AsRef<Path>) -> Result<Frame, IoError> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    if bytes.len() % RECORD != 0 {
        return Err(IoError::TruncatedFile {
            path: path.to_path_buf(),
            len: bytes.len() as u64,
        });
    }
    let n = bytes.len() / RECORD;
    let mut points = Vec::with_capacity(n);
    let mut intensities = Vec::with_capacity(n);
    for (i, rec) in bytes.chunks_exact(RECORD).enumerate() {
        let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap());
        let vals = [f(0), f(1), f(2), f(3)];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(IoError::NonFiniteValue {
                path: path.to_path_buf(),
                record: i,
            });
        }
        points.push(Point3::new(vals[0] as f64, vals[1] as f64, vals[2] as f64));
        intensities.push(vals[3] as f64);
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Frame {
        id,
        sensor_id: String::new(),
        points,
        intensities,
    })
}

pub fn encode_point_bin(frame: &Frame) -> Vec<u8> {
    let mut out = Vec::with_capacity(frame.len() * RECORD);
    for (p, &i) in frame.points.iter().zip(&frame.intensities) {
        for v in [p.x, p.y, p.z, i] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn write_point_bin(frame: &Frame, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_bytes(path.as_ref(), &encode_point_bin(frame))
}

/// Adds `z_offset` to every z, e.g. to move the origin from the sensor to the ground.
pub fn apply_ground_shift(frame: &Frame, z_offset: f64) -> Frame {
    let mut out = frame.clone();
    for p in &mut out.points {
        p.z += z_offset;
    }
    out
}

/// Axis-aligned detection-range crop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeCrop {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for RangeCrop {
    fn default() -> Self {
        Self {
            min: [-75.2, -75.2, -2.0],
            max: [75.2, 75.2, 4.0],
        }
    }
}

impl RangeCrop {
    pub fn contains(&self, p: Point3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

pub fn crop_to_range(frame: &Frame, crop: &RangeCrop) -> Frame {
    let mut out = Frame {
        id: frame.id.clone(),
        sensor_id: frame.sensor_id.clone(),
        points: Vec::new(),
        intensities: Vec::new(),
    };
    for (p, &i) in frame.points.iter().zip(&frame.intensities) {
        if crop.contains(*p) {
            out.push(*p, i);
        }
    }
    out
}
