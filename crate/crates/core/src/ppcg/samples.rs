//! Per-frame training samples built from pseudo boxes, and their on-disk form.

use std::path::{Path, PathBuf};

use rand::Rng;

use super::{
    cf_ppcg_frame, cf_sample_frame, rc_ppcg_frame, PpcgConfig, PseudoPointSet, SetFlag,
    SidecarRecord,
};
use crate::frame::Frame;
use crate::io::{self, DatasetManifest, FrameEntry, IoError, Label};
use crate::models::ModelLibrary;
use crate::sensor::SensorSpec;

/// A frame, its labels, and one sidecar record per input box.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub frame: Frame,
    pub labels: Vec<Label>,
    pub sidecar: Vec<SidecarRecord>,
}

impl TrainingSample {
    /// Writes `<id>.bin`, `<id>.txt` and `<id>.json` under `dir`; returns the paths.
    pub fn write(&self, dir: &Path) -> Result<[PathBuf; 3], IoError> {
        let id = &self.frame.id;
        let paths = [
            dir.join(format!("{id}.bin")),
            dir.join(format!("{id}.txt")),
            dir.join(format!("{id}.json")),
        ];
        io::write_point_bin(&self.frame, &paths[0])?;
        io::write_labels(&self.labels, &paths[1])?;
        let mut text = serde_json::to_vec_pretty(&self.sidecar).expect("sidecar serializes");
        text.push(b'\n');
        io::write_bytes(&paths[2], &text)?;
        Ok(paths)
    }
}

fn sidecar(sets: &[PseudoPointSet]) -> Vec<SidecarRecord> {
    let mut side: Vec<SidecarRecord> = sets.iter().map(|s| s.sidecar()).collect();
    side.sort_by_key(|r| r.box_id);
    side
}

/// RC sample: the frame with interior points replaced, labeled with every box.
pub fn rc_training_sample(
    frame: &Frame,
    labels: &[Label],
    lib: &ModelLibrary,
    spec: &SensorSpec,
    cfg: &PpcgConfig,
) -> TrainingSample {
    let boxes: Vec<_> = labels.iter().map(|l| l.bbox).collect();
    let (out, sets) = rc_ppcg_frame(frame, &boxes, lib, spec, cfg);
    TrainingSample {
        frame: out,
        labels: labels.to_vec(),
        sidecar: sidecar(&sets),
    }
}

/// CF sample: a stand-alone `<id>_cf` frame holding only the mapped-back scan
/// points, labeled with the boxes whose set is non-empty.
pub fn cf_training_sample<R: Rng + ?Sized>(
    frame: &Frame,
    labels: &[Label],
    lib: &ModelLibrary,
    spec: &SensorSpec,
    cfg: &PpcgConfig,
    rng: &mut R,
) -> TrainingSample {
    let boxes: Vec<_> = labels.iter().map(|l| l.bbox).collect();
    let (_, sets) = cf_ppcg_frame(frame, &boxes, lib, spec, cfg, rng);
    let kept = sets
        .iter()
        .filter(|s| !s.points.is_empty() && !s.has_flag(SetFlag::TooSparse))
        .map(|s| labels[s.box_id])
        .collect();
    TrainingSample {
        frame: cf_sample_frame(frame, &sets),
        labels: kept,
        sidecar: sidecar(&sets),
    }
}

/// `manifest.json` listing `<id>.bin` for each id, relative to `dir`.
pub fn write_split_manifest(
    dir: &Path,
    ids: &[String],
    sensor: &str,
    split: &str,
) -> Result<PathBuf, IoError> {
    let path = dir.join("manifest.json");
    DatasetManifest {
        root: PathBuf::from("."),
        split: split.to_string(),
        frames: ids
            .iter()
            .map(|id| FrameEntry {
                id: id.clone(),
                path: PathBuf::from(format!("{id}.bin")),
                sensor: sensor.to_string(),
            })
            .collect(),
    }
    .save(&path)?;
    Ok(path)
}
