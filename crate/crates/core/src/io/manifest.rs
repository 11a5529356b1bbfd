use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_bytes, write_bytes, IoError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub id: String,
    /// Relative to the manifest root.
    pub path: PathBuf,
    pub sensor: String,
}

/// JSON index of the frames in one dataset split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Resolved against the manifest's own directory when relative.
    #[serde(default)]
    pub root: PathBuf,
    #[serde(default)]
    pub split: String,
    pub frames: Vec<FrameEntry>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, IoError> {
        let path = path.as_ref();
        let bytes = read_bytes(path)?;
        let mut m: Self = serde_json::from_slice(&bytes).map_err(|e| IoError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if m.root.is_relative() {
            let base = path.parent().unwrap_or(Path::new(""));
            m.root = base.join(&m.root);
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IoError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_bytes(path.as_ref(), (text + "\n").as_bytes())
    }

    pub fn frame_path(&self, entry: &FrameEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    /// Checks id uniqueness and that every referenced file exists.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut problems = Vec::new();
        let mut seen = HashSet::new();
        for e in &self.frames {
            if !seen.insert(e.id.as_str()) {
                problems.push(format!("duplicate frame id `{}`", e.id));
            }
            let p = self.frame_path(e);
            if !p.is_file() {
                problems.push(format!("frame `{}`: {} does not exist", e.id, p.display()));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}
