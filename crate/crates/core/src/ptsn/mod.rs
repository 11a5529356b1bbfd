//! Post-training size normalization.
//!
//! A detector trained on the source domain is run on target frames scaled by
//! `s`; dividing its box sizes by `s` gives the predicted mean object size as a
//! function of `s`. The search picks the grid scale whose prediction is closest
//! to an externally estimated target mean.

mod detector;
mod iterate;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use detector::{
    format_replay, AabbDetector, ConstantDetector, Detector, ReplayBox, ReplayDetector,
    ReplayRecord, SyntheticDetector, REPLAY_SCALE_TOLERANCE,
};
pub use iterate::{
    dali_iterate, iteration_dir, load_ptsn_result, DetectorProvider, FixedDetector, IterateConfig,
    IterateOutcome, IterationRecord, ReplaySchedule, ResumeManifest, Stage, StageStatus,
};

use crate::frame::Frame;
use crate::geom::{scale_frame, unscale_box, Box3D, GeomError};
use crate::io::{IoError, Label};

#[derive(Debug, thiserror::Error)]
pub enum PtsnError {
    #[error("every frame produced zero detections above the confidence floor")]
    AllFramesEmpty,
    #[error("no frames to evaluate")]
    NoFrames,
    #[error("invalid PTSN config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("frame `{0}` is not in the replay file")]
    MissingFrame(String),
    #[error("frame `{frame}`: no recorded scale within {tolerance} of {scale}")]
    ScaleNotRecorded {
        frame: String,
        scale: f64,
        tolerance: f64,
    },
    #[error("{path}:{line}: {message}")]
    Replay {
        path: String,
        line: usize,
        message: String,
    },
    #[error("detector: {0}")]
    Detector(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("iteration {iteration}, stage {stage:?}: {message}")]
    Stage {
        iteration: usize,
        stage: Stage,
        message: String,
    },
}

/// Detector output for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub frame_id: String,
    pub boxes: Vec<Box3D>,
    pub confidences: Vec<f64>,
}

impl DetectionSet {
    pub fn new(frame_id: impl Into<String>) -> Self {
        Self {
            frame_id: frame_id.into(),
            boxes: Vec::new(),
            confidences: Vec::new(),
        }
    }

    pub fn push(&mut self, b: Box3D, conf: f64) {
        self.boxes.push(b);
        self.confidences.push(conf);
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Keeps detections with confidence at or above `floor`.
    pub fn filtered(&self, floor: f64) -> Self {
        let mut out = Self::new(self.frame_id.clone());
        for (b, &c) in self.boxes.iter().zip(&self.confidences) {
            if c >= floor {
                out.push(*b, c);
            }
        }
        out
    }

    pub fn to_labels(&self) -> Vec<Label> {
        self.boxes
            .iter()
            .zip(&self.confidences)
            .map(|(b, &c)| Label::new(*b, c))
            .collect()
    }

    pub fn from_labels(frame_id: impl Into<String>, labels: &[Label]) -> Self {
        let mut out = Self::new(frame_id);
        for l in labels {
            out.push(l.bbox, l.confidence);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSize {
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub volume: f64,
    pub frames_used: usize,
    pub frames_skipped: usize,
}

impl MeanSize {
    pub fn from_dims(l: f64, w: f64, h: f64) -> Self {
        Self {
            l,
            w,
            h,
            volume: l * w * h,
            frames_used: 0,
            frames_skipped: 0,
        }
    }

    pub fn dims(&self) -> [f64; 3] {
        [self.l, self.w, self.h]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Metric {
    Volume,
    DimsL2,
}

impl Metric {
    pub fn residual(self, pred: &MeanSize, est: &MeanSize) -> f64 {
        match self {
            Metric::Volume => (pred.volume - est.volume).abs(),
            Metric::DimsL2 => {
                let (dl, dw, dh) = (pred.l - est.l, pred.w - est.w, pred.h - est.h);
                (dl * dl + dw * dw + dh * dh).sqrt()
            }
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "volume" => Ok(Metric::Volume),
            "dims_l2" | "dims" | "l2" => Ok(Metric::DimsL2),
            other => Err(format!(
                "unknown metric `{other}` (expected volume or dims_l2)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtsnConfig {
    pub scale_grid: Vec<f64>,
    #[serde(default = "default_metric")]
    pub metric: Metric,
    /// Estimated target mean (l, w, h), meters.
    pub estimated_mean: [f64; 3],
    #[serde(default = "default_floor")]
    pub confidence_floor: f64,
}

fn default_metric() -> Metric {
    Metric::DimsL2
}

fn default_floor() -> f64 {
    0.6
}

/// `lo, lo+step, ..., hi` with endpoints computed by index, rounded to 1e-9.
pub fn scale_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0 && lo <= hi) {
        return Vec::new();
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| ((lo + step * i as f64) * 1e9).round() / 1e9)
        .collect()
}

impl PtsnConfig {
    pub fn new(estimated_mean: [f64; 3]) -> Self {
        Self {
            scale_grid: scale_grid(0.80, 1.40, 0.01),
            metric: Metric::DimsL2,
            estimated_mean,
            confidence_floor: 0.6,
        }
    }

    pub fn validate(&self) -> Result<(), PtsnError> {
        let bad = |m: &str| Err(PtsnError::InvalidConfig(m.to_string()));
        if self.scale_grid.is_empty() {
            return bad("scale grid is empty");
        }
        if self.scale_grid.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("scale grid values must be finite and > 0");
        }
        if self.scale_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("scale grid must be strictly ascending");
        }
        if !(0.0..=1.0).contains(&self.confidence_floor) {
            return bad("confidence_floor must be in [0, 1]");
        }
        if self
            .estimated_mean
            .iter()
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return bad("estimated mean dims must be finite and > 0");
        }
        Ok(())
    }

    pub fn estimated(&self) -> MeanSize {
        let [l, w, h] = self.estimated_mean;
        MeanSize::from_dims(l, w, h)
    }
}

/// Runs the detector on `frame` scaled by `s` and keeps confident boxes.
fn detect_scaled(
    det: &dyn Detector,
    frame: &Frame,
    s: f64,
    floor: f64,
) -> Result<DetectionSet, PtsnError> {
    let scaled = scale_frame(frame, s)?;
    Ok(det.detect(&scaled, s)?.filtered(floor))
}

/// Predicted mean size at scale `s`: per frame, the mean of box dims divided by
/// `s`; then the mean over frames with at least one detection.
pub fn predicted_mean_size(
    det: &dyn Detector,
    frames: &[Frame],
    s: f64,
    cfg: &PtsnConfig,
) -> Result<MeanSize, PtsnError> {
    if !(s.is_finite() && s > 0.0) {
        return Err(GeomError::NonPositiveScale(s).into());
    }
    if frames.is_empty() {
        return Err(PtsnError::NoFrames);
    }
    let per_frame: Vec<Option<[f64; 3]>> = frames
        .par_iter()
        .map(|f| {
            let d = detect_scaled(det, f, s, cfg.confidence_floor)?;
            if d.is_empty() {
                return Ok(None);
            }
            let mut acc = [0.0; 3];
            for b in &d.boxes {
                acc[0] += b.l / s;
                acc[1] += b.w / s;
                acc[2] += b.h / s;
            }
            let o = d.len() as f64;
            Ok(Some([acc[0] / o, acc[1] / o, acc[2] / o]))
        })
        .collect::<Result<_, PtsnError>>()?;

    let mut acc = [0.0; 3];
    let mut used = 0;
    for m in per_frame.iter().flatten() {
        acc[0] += m[0];
        acc[1] += m[1];
        acc[2] += m[2];
        used += 1;
    }
    if used == 0 {
        return Err(PtsnError::AllFramesEmpty);
    }
    let n = used as f64;
    let mut out = MeanSize::from_dims(acc[0] / n, acc[1] / n, acc[2] / n);
    out.frames_used = used;
    out.frames_skipped = frames.len() - used;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub s: f64,
    pub mean: MeanSize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtsnResult {
    pub scale: f64,
    pub metric: Metric,
    pub curve: Vec<CurvePoint>,
}

impl PtsnResult {
    pub fn best(&self) -> &CurvePoint {
        self.curve
            .iter()
            .find(|c| c.s == self.scale)
            .expect("selected scale is on the curve")
    }
}

/// Index of the minimal residual; near-equal residuals go to the scale closest to 1.
pub fn argmin_scale(scales: &[f64], residuals: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &r) in residuals.iter().enumerate() {
        let Some(b) = best else {
            best = Some(i);
            continue;
        };
        let rb = residuals[b];
        let tol = 1e-12 * rb.abs().max(r.abs());
        if r < rb - tol || (r <= rb + tol && (scales[i] - 1.0).abs() < (scales[b] - 1.0).abs()) {
            best = Some(i);
        }
    }
    best
}

/// Evaluates the grid and returns the scale minimizing the configured metric.
pub fn ptsn_search(
    det: &dyn Detector,
    frames: &[Frame],
    cfg: &PtsnConfig,
) -> Result<PtsnResult, PtsnError> {
    cfg.validate()?;
    let est = cfg.estimated();
    let means: Vec<MeanSize> = cfg
        .scale_grid
        .par_iter()
        .map(|&s| predicted_mean_size(det, frames, s, cfg))
        .collect::<Result<_, _>>()?;
    let curve: Vec<CurvePoint> = cfg
        .scale_grid
        .iter()
        .zip(means)
        .map(|(&s, mean)| CurvePoint {
            s,
            mean,
            residual: cfg.metric.residual(&mean, &est),
        })
        .collect();
    let residuals: Vec<f64> = curve.iter().map(|c| c.residual).collect();
    let i = argmin_scale(&cfg.scale_grid, &residuals).expect("grid validated non-empty");
    Ok(PtsnResult {
        scale: cfg.scale_grid[i],
        metric: cfg.metric,
        curve,
    })
}

/// Pseudo labels at scale `s`: detect on the scaled frame, then map each box
/// back with [`unscale_box`]. Confidences are kept; nothing is filtered.
pub fn generate_pseudo_labels(
    det: &dyn Detector,
    frames: &[Frame],
    s: f64,
) -> Result<Vec<DetectionSet>, PtsnError> {
    frames
        .par_iter()
        .map(|f| {
            let scaled = scale_frame(f, s)?;
            let raw = det.detect(&scaled, s)?;
            let mut out = DetectionSet::new(f.id.clone());
            for (b, &c) in raw.boxes.iter().zip(&raw.confidences) {
                out.push(unscale_box(b, s)?, c);
            }
            Ok(out)
        })
        .collect()
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("s,l,w,h,volume,frames_used\n");
    for c in curve {
        out.push_str(&format!(
            "{:.4},{:.6},{:.6},{:.6},{:.6},{}\n",
            c.s, c.mean.l, c.mean.w, c.mean.h, c.mean.volume, c.mean.frames_used
        ));
    }
    out
}

pub fn write_curve_csv(curve: &[CurvePoint], path: impl AsRef<Path>) -> Result<(), IoError> {
    crate::io::write_bytes(path.as_ref(), curve_csv(curve).as_bytes())
}

/// Source-side size statistics used to form the target-mean estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeStatistics {
    pub source_mean_lwh: [f64; 3],
    /// Known target mean, when available (statistical normalization setting).
    #[serde(default)]
    pub target_mean_lwh: Option<[f64; 3]>,
    /// Target minus source offset, used when the target mean itself is absent.
    #[serde(default)]
    pub target_offset_lwh: Option<[f64; 3]>,
}

impl SizeStatistics {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, IoError> {
        let path = path.as_ref();
        let bytes = crate::io::read_bytes(path)?;
        serde_json::from_slice(&bytes).map_err(|e| IoError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Estimated target mean (l, w, h).
    pub fn estimate(&self) -> [f64; 3] {
        if let Some(t) = self.target_mean_lwh {
            return t;
        }
        let d = self.target_offset_lwh.unwrap_or([0.0; 3]);
        let s = self.source_mean_lwh;
        [s[0] + d[0], s[1] + d[1], s[2] + d[2]]
    }
}

/// Mean (l, w, h) over a set of annotations, e.g. source labels.
pub fn mean_label_dims<'a>(labels: impl IntoIterator<Item = &'a Label>) -> Option<[f64; 3]> {
    let mut acc = [0.0; 3];
    let mut n = 0usize;
    for l in labels {
        acc[0] += l.bbox.l;
        acc[1] += l.bbox.w;
        acc[2] += l.bbox.h;
        n += 1;
    }
    (n > 0).then(|| [acc[0] / n as f64, acc[1] / n as f64, acc[2] / n as f64])
}

/// Writes `value` as pretty JSON via a temporary file and rename.
pub(crate) fn write_json_atomic<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    let tmp = path.with_extension("json.tmp");
    let mut text = serde_json::to_vec_pretty(value).map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push(b'\n');
    crate::io::write_bytes(&tmp, &text)?;
    std::fs::rename(&tmp, path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}
