use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Skip;

pub const FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Timing {
    pub count: usize,
    pub total_s: f64,
    pub mean_s: f64,
    pub p95_s: f64,
}

impl Timing {
    /// Nearest-rank p95.
    pub fn from_samples(samples: &[Duration]) -> Self {
        let mut s: Vec<f64> = samples.iter().map(Duration::as_secs_f64).collect();
        s.sort_by(f64::total_cmp);
        let total: f64 = s.iter().sum();
        let n = s.len();
        let p95 = if n == 0 {
            0.0
        } else {
            s[((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1]
        };
        Self {
            count: n,
            total_s: total,
            mean_s: if n == 0 { 0.0 } else { total / n as f64 },
            p95_s: p95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Partial,
    Paused,
}

/// Written once at the end of a run. Repeated runs with the same inputs and
/// seed differ only in `timings`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub status: RunStatus,
    pub config: serde_json::Value,
    pub inputs: Vec<InputHash>,
    /// Relative to the run directory, sorted.
    pub outputs: Vec<PathBuf>,
    pub skipped: Vec<Skip>,
    pub summary: serde_json::Value,
    pub timings: BTreeMap<String, Timing>,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            status: RunStatus::Ok,
            config: serde_json::to_value(config).expect("config serializes"),
            inputs: Vec::new(),
            outputs: Vec::new(),
            skipped: Vec::new(),
            summary: serde_json::Value::Null,
            timings: BTreeMap::new(),
        }
    }

    /// Hashes `path` if it is a readable file; missing inputs are left out.
    pub fn add_input(&mut self, path: &Path) {
        if let Ok(bytes) = std::fs::read(path) {
            self.inputs.push(InputHash {
                path: path.to_path_buf(),
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
    }

    pub fn time(&mut self, stage: &str, samples: &[Duration]) {
        self.timings
            .insert(stage.to_string(), Timing::from_samples(samples));
    }

    /// Lists every file under `dir` except this manifest.
    pub fn collect_outputs(&mut self, dir: &Path) -> Result<()> {
        let mut out = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(&d).with_context(|| format!("listing {}", d.display()))? {
                let p = e?.path();
                if p.is_dir() {
                    stack.push(p);
                } else if p.file_name().is_some_and(|n| n != FILE) {
                    out.push(p.strip_prefix(dir).expect("under dir").to_path_buf());
                }
            }
        }
        out.sort();
        self.outputs = out;
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(FILE);
        write_atomic(&path, &serde_json::to_vec_pretty(self)?)?;
        Ok(path)
    }
}

/// Writes to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p95_is_nearest_rank() {
        let xs: Vec<Duration> = (1..=20).map(Duration::from_millis).collect();
        let t = Timing::from_samples(&xs);
        assert_eq!(t.count, 20);
        assert!((t.p95_s - 0.019).abs() < 1e-12);
        assert!((t.mean_s - 0.0105).abs() < 1e-12);
        assert_eq!(Timing::from_samples(&[]).p95_s, 0.0);
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.json");
        write_atomic(&p, b"{}").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"{}");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
