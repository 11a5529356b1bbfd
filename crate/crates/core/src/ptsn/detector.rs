use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DetectionSet, PtsnError};
use crate::frame::Frame;
use crate::geom::{normalize_angle, Box3D, Point3};
use crate::ppcg::frame_seed;

/// Stand-in for a source-trained network.
///
/// `frame` is the already scaled input and `scale` the factor that was applied.
/// Implementations must be deterministic and safe to call concurrently; a real
/// network would ignore `scale`, the replay detector uses it as a lookup key.
pub trait Detector: Send + Sync {
    fn detect(&self, frame: &Frame, scale: f64) -> Result<DetectionSet, PtsnError>;

    fn describe(&self) -> String {
        "detector".to_string()
    }
}

/// Emits one fixed box per non-empty frame.
#[derive(Debug, Clone)]
pub struct ConstantDetector {
    bbox: Box3D,
    confidence: f64,
}

impl ConstantDetector {
    pub fn new(dims: [f64; 3]) -> Self {
        let [l, w, h] = dims;
        Self::with_box(Box3D::new(0.0, 0.0, 0.5 * h, l, w, h, 0.0).expect("positive dims"))
    }

    pub fn with_box(bbox: Box3D) -> Self {
        Self {
            bbox,
            confidence: 1.0,
        }
    }
}

impl Detector for ConstantDetector {
    fn detect(&self, frame: &Frame, _scale: f64) -> Result<DetectionSet, PtsnError> {
        let mut out = DetectionSet::new(frame.id.clone());
        if !frame.is_empty() {
            out.push(self.bbox, self.confidence);
        }
        Ok(out)
    }

    fn describe(&self) -> String {
        format!(
            "constant({} x {} x {})",
            self.bbox.l, self.bbox.w, self.bbox.h
        )
    }
}

/// Axis-aligned box around every point of the frame. Scale-equivariant:
/// detecting on a frame scaled by `s` yields the same box scaled by `s`.
#[derive(Debug, Clone)]
pub struct AabbDetector {
    pub heading: f64,
}

impl Detector for AabbDetector {
    fn detect(&self, frame: &Frame, _scale: f64) -> Result<DetectionSet, PtsnError> {
        let mut out = DetectionSet::new(frame.id.clone());
        if frame.is_empty() {
            return Ok(out);
        }
        let mut lo = Point3::splat(f64::INFINITY);
        let mut hi = Point3::splat(f64::NEG_INFINITY);
        for &p in &frame.points {
            lo = lo.min(p);
            hi = hi.max(p);
        }
        let c = (lo + hi) * 0.5;
        let d = hi - lo;
        if let Ok(b) = Box3D::new(c.x, c.y, c.z, d.x, d.y, d.z, self.heading) {
            out.push(b, 1.0);
        }
        Ok(out)
    }

    fn describe(&self) -> String {
        "aabb".to_string()
    }
}

/// Clusters non-ground points on a hash grid and emits one box per cluster,
/// sized from the source-domain mean regardless of the input scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticDetector {
    pub source_mean: [f64; 3],
    /// Relative size noise in [0, 0.5).
    pub jitter: f64,
    pub seed: u64,
    pub cell_size: f64,
    pub ground_z: f64,
    pub min_cluster_points: usize,
}

impl SyntheticDetector {
    pub fn new(source_mean: [f64; 3], jitter: f64, seed: u64) -> Result<Self, PtsnError> {
        if !(0.0..0.5).contains(&jitter) {
            return Err(PtsnError::InvalidConfig(format!(
                "jitter {jitter} outside [0, 0.5)"
            )));
        }
        if source_mean.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(PtsnError::InvalidConfig(
                "source mean dims must be > 0".into(),
            ));
        }
        Ok(Self {
            source_mean,
            jitter,
            seed,
            cell_size: 0.75,
            ground_z: 0.15,
            min_cluster_points: 5,
        })
    }

    /// Connected components of occupied cells (26-neighbourhood). Each cluster is a
    /// list of point indices; clusters are ordered by their smallest index.
    pub fn clusters(&self, frame: &Frame) -> Vec<Vec<usize>> {
        let inv = 1.0 / self.cell_size;
        let key = |p: Point3| {
            (
                (p.x * inv).floor() as i64,
                (p.y * inv).floor() as i64,
                (p.z * inv).floor() as i64,
            )
        };
        let mut cells: HashMap<(i64, i64, i64), usize> = HashMap::new();
        let mut cell_points: Vec<Vec<usize>> = Vec::new();
        for (i, &p) in frame.points.iter().enumerate() {
            if p.z < self.ground_z {
                continue;
            }
            let id = *cells.entry(key(p)).or_insert_with(|| {
                cell_points.push(Vec::new());
                cell_points.len() - 1
            });
            cell_points[id].push(i);
        }

        let mut parent: Vec<usize> = (0..cell_points.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for (&(x, y, z), &id) in &cells {
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(&nb) = cells.get(&(x + dx, y + dy, z + dz)) {
                            let (a, b) = (find(&mut parent, id), find(&mut parent, nb));
                            if a != b {
                                parent[a.max(b)] = a.min(b);
                            }
                        }
                    }
                }
            }
        }

        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for (id, pts) in cell_points.into_iter().enumerate() {
            let root = find(&mut parent, id);
            groups.entry(root).or_default().extend(pts);
        }
        let mut out: Vec<Vec<usize>> = groups
            .into_values()
            .filter(|g| g.len() >= self.min_cluster_points)
            .map(|mut g| {
                g.sort_unstable();
                g
            })
            .collect();
        out.sort_by_key(|g| g[0]);
        out
    }
}

/// Principal XY direction of a point set; 0 when isotropic.
fn principal_heading(pts: &[Point3], c: Point3) -> f64 {
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p.x - c.x, p.y - c.y);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx - syy).abs() < 1e-12 && sxy.abs() < 1e-12 {
        return 0.0;
    }
    normalize_angle(0.5 * (2.0 * sxy).atan2(sxx - syy))
}

impl Detector for SyntheticDetector {
    fn detect(&self, frame: &Frame, _scale: f64) -> Result<DetectionSet, PtsnError> {
        let mut out = DetectionSet::new(frame.id.clone());
        for (k, cluster) in self.clusters(frame).into_iter().enumerate() {
            let pts: Vec<Point3> = cluster.iter().map(|&i| frame.points[i]).collect();
            let c = pts.iter().fold(Point3::ZERO, |a, &p| a + p) / pts.len() as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(
                frame_seed(self.seed, &frame.id) ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
            );
            let mut dim = |m: f64| {
                if self.jitter == 0.0 {
                    m
                } else {
                    m * (1.0 + self.jitter * rng.gen_range(-1.0..=1.0))
                }
            };
            let (l, w, h) = (
                dim(self.source_mean[0]),
                dim(self.source_mean[1]),
                dim(self.source_mean[2]),
            );
            let n = pts.len() as f64;
            let b = Box3D::new(c.x, c.y, c.z, l, w, h, principal_heading(&pts, c))
                .map_err(|e| PtsnError::Detector(e.to_string()))?;
            out.push(b, n / (n + 10.0));
        }
        Ok(out)
    }

    fn describe(&self) -> String {
        format!(
            "synthetic(mean=[{}, {}, {}], jitter={}, seed={})",
            self.source_mean[0], self.source_mean[1], self.source_mean[2], self.jitter, self.seed
        )
    }
}

/// Recorded scales farther than this from the request are not served.
pub const REPLAY_SCALE_TOLERANCE: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayBox {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub heading: f64,
    pub conf: f64,
}

/// One line of a replay file: detections for `frame_id` at input `scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayRecord {
    pub frame_id: String,
    pub scale: f64,
    pub boxes: Vec<ReplayBox>,
}

impl ReplayRecord {
    pub fn from_detections(d: &DetectionSet, scale: f64) -> Self {
        Self {
            frame_id: d.frame_id.clone(),
            scale,
            boxes: d
                .boxes
                .iter()
                .zip(&d.confidences)
                .map(|(b, &conf)| ReplayBox {
                    x: b.x,
                    y: b.y,
                    z: b.z,
                    l: b.l,
                    w: b.w,
                    h: b.h,
                    heading: b.heading,
                    conf,
                })
                .collect(),
        }
    }
}

/// Serves detections recorded offline, keyed by (frame id, nearest scale).
#[derive(Debug, Clone)]
pub struct ReplayDetector {
    path: PathBuf,
    frames: HashMap<String, Vec<(f64, DetectionSet)>>,
}

impl ReplayDetector {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PtsnError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| crate::io::IoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, PtsnError> {
        let err = |line: usize, message: String| PtsnError::Replay {
            path: path.display().to_string(),
            line,
            message,
        };
        let mut frames: HashMap<String, Vec<(f64, DetectionSet)>> = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let rec: ReplayRecord =
                serde_json::from_str(line).map_err(|e| err(n + 1, e.to_string()))?;
            if !(rec.scale.is_finite() && rec.scale > 0.0) {
                return Err(err(n + 1, format!("scale {} must be > 0", rec.scale)));
            }
            let mut set = DetectionSet::new(rec.frame_id.clone());
            for b in &rec.boxes {
                let bx = Box3D::new(b.x, b.y, b.z, b.l, b.w, b.h, b.heading)
                    .map_err(|e| err(n + 1, e.to_string()))?;
                set.push(bx, b.conf);
            }
            let entry = frames.entry(rec.frame_id).or_default();
            if entry.iter().any(|(s, _)| *s == rec.scale) {
                return Err(err(
                    n + 1,
                    format!("duplicate record for scale {}", rec.scale),
                ));
            }
            entry.push((rec.scale, set));
        }
        for v in frames.values_mut() {
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        Ok(Self {
            path: path.to_path_buf(),
            frames,
        })
    }

    pub fn recorded_scales(&self, frame_id: &str) -> Option<Vec<f64>> {
        self.frames
            .get(frame_id)
            .map(|v| v.iter().map(|(s, _)| *s).collect())
    }

    pub fn frame_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.frames.keys().map(String::as_str).collect();
        ids.sort_unstable();
        ids
    }
}

impl Detector for ReplayDetector {
    fn detect(&self, frame: &Frame, scale: f64) -> Result<DetectionSet, PtsnError> {
        let recs = self
            .frames
            .get(&frame.id)
            .ok_or_else(|| PtsnError::MissingFrame(frame.id.clone()))?;
        let (s, set) = recs
            .iter()
            .min_by(|a, b| (a.0 - scale).abs().total_cmp(&(b.0 - scale).abs()))
            .expect("frames are recorded with at least one scale");
        if (s - scale).abs() > REPLAY_SCALE_TOLERANCE + 1e-12 {
            return Err(PtsnError::ScaleNotRecorded {
                frame: frame.id.clone(),
                scale,
                tolerance: REPLAY_SCALE_TOLERANCE,
            });
        }
        Ok(set.clone())
    }

    fn describe(&self) -> String {
        format!("replay({})", self.path.display())
    }
}

/// Serializes records as JSON lines.
pub fn format_replay(records: &[ReplayRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("replay records serialize"));
        out.push('\n');
    }
    out
}
