//! The outer denoising loop as a data-producing pipeline.
//!
//! Each iteration runs the scale search, writes pseudo labels, then RC and CF
//! training samples. Training the detector is external: the next iteration
//! asks a [`DetectorProvider`] for the retrained detector and pauses when none
//! is available yet. Progress is kept in `resume.json` so an interrupted or
//! paused run picks up at the first unfinished stage.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    generate_pseudo_labels, ptsn_search, write_curve_csv, write_json_atomic, DetectionSet,
    Detector, PtsnConfig, PtsnError, PtsnResult, ReplayDetector,
};
use crate::frame::Frame;
use crate::io::{self, IoError};
use crate::models::ModelLibrary;
use crate::ppcg::{
    cf_training_sample, frame_seed, rc_training_sample, write_split_manifest, PpcgConfig,
};
use crate::sensor::SensorSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ptsn,
    Labels,
    Rc,
    Cf,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Ptsn, Stage::Labels, Stage::Rc, Stage::Cf];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Running,
    Paused,
    Complete,
}

/// Source of the detector for a given iteration. `Ok(None)` means the
/// detector for that iteration has not been trained yet.
pub trait DetectorProvider {
    fn detector(&self, iteration: usize) -> Result<Option<Arc<dyn Detector>>, PtsnError>;

    fn describe(&self) -> String;
}

/// The same detector for every iteration.
pub struct FixedDetector(pub Arc<dyn Detector>);

impl DetectorProvider for FixedDetector {
    fn detector(&self, _iteration: usize) -> Result<Option<Arc<dyn Detector>>, PtsnError> {
        Ok(Some(self.0.clone()))
    }

    fn describe(&self) -> String {
        self.0.describe()
    }
}

/// One replay file per iteration. A missing entry or file pauses the loop.
#[derive(Debug, Clone)]
pub struct ReplaySchedule {
    pub paths: Vec<PathBuf>,
}

impl DetectorProvider for ReplaySchedule {
    fn detector(&self, iteration: usize) -> Result<Option<Arc<dyn Detector>>, PtsnError> {
        match self.paths.get(iteration) {
            Some(p) if p.is_file() => Ok(Some(Arc::new(ReplayDetector::load(p)?))),
            _ => Ok(None),
        }
    }

    fn describe(&self) -> String {
        let list: Vec<String> = self.paths.iter().map(|p| p.display().to_string()).collect();
        format!("replay[{}]", list.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateConfig {
    pub iterations: usize,
    pub ptsn: PtsnConfig,
    #[serde(default)]
    pub ppcg: PpcgConfig,
    #[serde(default)]
    pub seed: u64,
    /// Labeled source split; recorded for the external training step only.
    #[serde(default)]
    pub source_manifest: Option<PathBuf>,
    /// Stop after this many stages in one call (simulates an interruption).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_after_stages: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub scale: Option<f64>,
    pub stages_done: Vec<Stage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResumeManifest {
    pub iterations: usize,
    pub seed: u64,
    pub status: StageStatus,
    pub detector: String,
    pub source_manifest: Option<PathBuf>,
    pub records: Vec<IterationRecord>,
    #[serde(default)]
    pub note: Option<String>,
}

impl ResumeManifest {
    pub const FILE: &'static str = "resume.json";

    pub fn load(dir: &Path) -> Result<Option<Self>, PtsnError> {
        let path = dir.join(Self::FILE);
        if !path.is_file() {
            return Ok(None);
        }
        let bytes = io::read_bytes(&path)?;
        serde_json::from_slice(&bytes).map(Some).map_err(|e| {
            IoError::Parse {
                path,
                line: e.line(),
                message: e.to_string(),
            }
            .into()
        })
    }

    fn save(&self, dir: &Path) -> Result<(), PtsnError> {
        Ok(write_json_atomic(self, &dir.join(Self::FILE))?)
    }

    pub fn is_done(&self, iteration: usize, stage: Stage) -> bool {
        self.records
            .get(iteration)
            .is_some_and(|r| r.stages_done.contains(&stage))
    }

    /// First (iteration, stage) not yet completed.
    pub fn next_stage(&self) -> Option<(usize, Stage)> {
        (0..self.iterations)
            .flat_map(|k| Stage::ALL.iter().map(move |&s| (k, s)))
            .find(|&(k, s)| !self.is_done(k, s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateOutcome {
    pub status: StageStatus,
    pub scales: Vec<f64>,
    /// Where the run stopped, when not complete.
    pub next: Option<(usize, Stage)>,
}

pub fn iteration_dir(out: &Path, k: usize) -> PathBuf {
    out.join(format!("iter_{k}"))
}

fn stage_err(iteration: usize, stage: Stage) -> impl Fn(String) -> PtsnError {
    move |message| PtsnError::Stage {
        iteration,
        stage,
        message,
    }
}

fn read_pseudo_labels(dir: &Path, frames: &[Frame]) -> Result<Vec<DetectionSet>, PtsnError> {
    frames
        .iter()
        .map(|f| {
            let labels = io::read_labels(dir.join("labels").join(format!("{}.txt", f.id)))?;
            Ok(DetectionSet::from_labels(f.id.clone(), &labels))
        })
        .collect()
}

struct Ctx<'a> {
    frames: &'a [Frame],
    lib: &'a ModelLibrary,
    spec: &'a SensorSpec,
    cfg: &'a IterateConfig,
}

impl Ctx<'_> {
    fn run_ptsn(&self, det: &dyn Detector, dir: &Path) -> Result<f64, PtsnError> {
        let r = ptsn_search(det, self.frames, &self.cfg.ptsn)?;
        write_curve_csv(&r.curve, dir.join("curve.csv"))?;
        write_json_atomic(&r, &dir.join("ptsn.json"))?;
        Ok(r.scale)
    }

    fn run_labels(&self, det: &dyn Detector, s: f64, dir: &Path) -> Result<(), PtsnError> {
        let sets = generate_pseudo_labels(det, self.frames, s)?;
        for d in sets {
            let kept = d.filtered(self.cfg.ptsn.confidence_floor);
            io::write_labels(
                &kept.to_labels(),
                dir.join("labels").join(format!("{}.txt", d.frame_id)),
            )?;
        }
        Ok(())
    }

    /// RC samples: the frame with interior points replaced, labeled with all pseudo boxes.
    fn run_rc(&self, k: usize, dir: &Path) -> Result<(), PtsnError> {
        let labels = read_pseudo_labels(dir, self.frames)?;
        let out = dir.join("rc");
        let ids = self
            .frames
            .par_iter()
            .zip(labels.par_iter())
            .map(|(f, d)| {
                let sample =
                    rc_training_sample(f, &d.to_labels(), self.lib, self.spec, &self.cfg.ppcg);
                sample.write(&out)?;
                Ok(sample.frame.id)
            })
            .collect::<Result<Vec<String>, IoError>>()
            .map_err(|e| stage_err(k, Stage::Rc)(e.to_string()))?;
        write_split_manifest(&out, &ids, &self.spec.name, "rc")?;
        Ok(())
    }

    /// CF samples: one stand-alone frame per input frame holding only the
    /// relocated-scan points, labeled with the boxes whose set is non-empty.
    fn run_cf(&self, k: usize, dir: &Path) -> Result<(), PtsnError> {
        let labels = read_pseudo_labels(dir, self.frames)?;
        let out = dir.join("cf");
        let run_seed = self.cfg.seed.wrapping_add(k as u64);
        let ids = self
            .frames
            .par_iter()
            .zip(labels.par_iter())
            .map(|(f, d)| {
                let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(run_seed, &f.id));
                let sample = cf_training_sample(
                    f,
                    &d.to_labels(),
                    self.lib,
                    self.spec,
                    &self.cfg.ppcg,
                    &mut rng,
                );
                sample.write(&out)?;
                Ok(sample.frame.id)
            })
            .collect::<Result<Vec<String>, IoError>>()
            .map_err(|e| stage_err(k, Stage::Cf)(e.to_string()))?;
        write_split_manifest(&out, &ids, &self.spec.name, "cf")?;
        Ok(())
    }
}

/// Runs or resumes the loop in `out_dir`.
pub fn dali_iterate(
    provider: &dyn DetectorProvider,
    target_frames: &[Frame],
    lib: &ModelLibrary,
    spec: &SensorSpec,
    cfg: &IterateConfig,
    out_dir: &Path,
) -> Result<IterateOutcome, PtsnError> {
    if cfg.iterations == 0 {
        return Err(PtsnError::InvalidConfig("iterations must be >= 1".into()));
    }
    if target_frames.is_empty() {
        return Err(PtsnError::NoFrames);
    }
    cfg.ptsn.validate()?;
    cfg.ppcg.validate().map_err(PtsnError::InvalidConfig)?;

    let mut resume = match ResumeManifest::load(out_dir)? {
        Some(r) => {
            if r.iterations != cfg.iterations || r.seed != cfg.seed {
                return Err(PtsnError::InvalidConfig(format!(
                    "{} was written for iterations={} seed={}; refusing to resume with iterations={} seed={}",
                    out_dir.join(ResumeManifest::FILE).display(),
                    r.iterations,
                    r.seed,
                    cfg.iterations,
                    cfg.seed
                )));
            }
            r
        }
        None => ResumeManifest {
            iterations: cfg.iterations,
            seed: cfg.seed,
            status: StageStatus::Running,
            detector: provider.describe(),
            source_manifest: cfg.source_manifest.clone(),
            records: Vec::new(),
            note: None,
        },
    };
    while resume.records.len() < cfg.iterations {
        let iteration = resume.records.len();
        resume.records.push(IterationRecord {
            iteration,
            scale: None,
            stages_done: Vec::new(),
        });
    }
    resume.status = StageStatus::Running;
    resume.note = None;
    resume.save(out_dir)?;

    let ctx = Ctx {
        frames: target_frames,
        lib,
        spec,
        cfg,
    };
    let mut budget = cfg.stop_after_stages;
    let mut detector: Option<(usize, Arc<dyn Detector>)> = None;

    while let Some((k, stage)) = resume.next_stage() {
        if budget == Some(0) {
            resume.status = StageStatus::Paused;
            resume.note = Some("stopped by stage budget".into());
            resume.save(out_dir)?;
            return Ok(outcome(&resume));
        }
        let dir = iteration_dir(out_dir, k);
        if matches!(stage, Stage::Ptsn | Stage::Labels)
            && detector.as_ref().is_none_or(|(i, _)| *i != k)
        {
            match provider.detector(k)? {
                Some(d) => detector = Some((k, d)),
                None => {
                    resume.status = StageStatus::Paused;
                    resume.note = Some(format!("waiting for the detector of iteration {k}"));
                    resume.save(out_dir)?;
                    return Ok(outcome(&resume));
                }
            }
        }
        match stage {
            Stage::Ptsn => {
                let det = &detector.as_ref().expect("loaded above").1;
                let s = ctx.run_ptsn(det.as_ref(), &dir)?;
                resume.records[k].scale = Some(s);
            }
            Stage::Labels => {
                let det = &detector.as_ref().expect("loaded above").1;
                let s = resume.records[k]
                    .scale
                    .ok_or_else(|| stage_err(k, stage)("no scale recorded".into()))?;
                ctx.run_labels(det.as_ref(), s, &dir)?;
            }
            Stage::Rc => ctx.run_rc(k, &dir)?,
            Stage::Cf => ctx.run_cf(k, &dir)?,
        }
        resume.records[k].stages_done.push(stage);
        resume.save(out_dir)?;
        if let Some(b) = budget.as_mut() {
            *b -= 1;
        }
    }
    resume.status = StageStatus::Complete;
    resume.save(out_dir)?;
    Ok(outcome(&resume))
}

fn outcome(r: &ResumeManifest) -> IterateOutcome {
    IterateOutcome {
        status: r.status,
        scales: r.records.iter().filter_map(|x| x.scale).collect(),
        next: r.next_stage(),
    }
}

/// Loads `iter_k/ptsn.json`.
pub fn load_ptsn_result(out_dir: &Path, k: usize) -> Result<PtsnResult, PtsnError> {
    let path = iteration_dir(out_dir, k).join("ptsn.json");
    let bytes = io::read_bytes(&path)?;
    serde_json::from_slice(&bytes).map_err(|e| {
        IoError::Parse {
            path,
            line: e.line(),
            message: e.to_string(),
        }
        .into()
    })
}
