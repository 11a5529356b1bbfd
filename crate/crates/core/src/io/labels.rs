use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_bytes, write_bytes, IoError};
use crate::geom::Box3D;

/// A box with its detection confidence (1.0 for ground truth).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub bbox: Box3D,
    pub confidence: f64,
}

impl Label {
    pub fn new(bbox: Box3D, confidence: f64) -> Self {
        Self { bbox, confidence }
    }
}

pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<Label>, IoError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| IoError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(7..=8).contains(&fields.len()) {
            return Err(err(format!(
                "expected 7 or 8 fields, found {}",
                fields.len()
            )));
        }
        let mut v = [0.0f64; 8];
        v[7] = 1.0;
        for (k, f) in fields.iter().enumerate() {
            v[k] = f
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(format!("field {} `{f}` is not a finite number", k + 1)))?;
        }
        let bbox =
            Box3D::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6]).map_err(|e| err(e.to_string()))?;
        if !(0.0..=1.0).contains(&v[7]) {
            return Err(err(format!("confidence {} outside [0, 1]", v[7])));
        }
        out.push(Label::new(bbox, v[7]));
    }
    Ok(out)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<Label>, IoError> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|_| IoError::format(path, "not UTF-8"))?;
    parse_labels(&text, path)
}

pub fn format_labels(labels: &[Label]) -> String {
    let mut s = String::new();
    for l in labels {
        let b = &l.bbox;
        writeln!(
            s,
            "{:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
            b.x, b.y, b.z, b.l, b.w, b.h, b.heading, l.confidence
        )
        .unwrap();
    }
    s
}

pub fn write_labels(labels: &[Label], path: impl AsRef<Path>) -> Result<(), IoError> {
    write_bytes(path.as_ref(), format_labels(labels).as_bytes())
}
