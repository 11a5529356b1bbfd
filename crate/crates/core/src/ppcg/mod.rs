//! Pseudo point cloud generation for pseudo boxes.
//!
//! Ray-constrained (RC) generation re-shoots the rays of the points already
//! inside a box against the fitted model and replaces those points with the
//! hits. Constraint-free (CF) generation moves the box outward along its
//! planar direction by a relocation factor `s`, scans it with the full sensor
//! pattern, and divides the hits' X and Y by `s` to bring them back.

mod sampler;
mod samples;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use sampler::{sample_point_model, PointSampler};
pub use samples::{cf_training_sample, rc_training_sample, write_split_manifest, TrainingSample};

use crate::frame::Frame;
use crate::geom::{points_in_box, Box3D, Point3, Ray};
use crate::models::{
    align_model_to_box, select_model, ModelLibrary, PointMatchConfig, PosedGeometry, PosedModel,
    ShapeModel,
};
use crate::sensor::{angular_threshold, generate_scan_rays, AzimuthWindow, SensorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PseudoSource {
    Rc,
    Cf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetFlag {
    /// Interior count at or above the RC gate; box left untouched.
    Gated,
    /// No points available inside the box.
    NoInteriorPoints,
    /// RC produced nothing; original points were kept.
    EmptyFallback,
    /// CF scan too sparse at the drawn distance; retried closer.
    Retried,
    /// CF scan too sparse even after the retry; set is empty.
    TooSparse,
    /// No model could be selected or aligned.
    SelectionFailed,
}

/// Pseudo points generated for one box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoPointSet {
    pub box_id: usize,
    pub source: PseudoSource,
    pub points: Vec<Point3>,
    /// Intensity given to every point of the set.
    pub intensity: f64,
    /// CF relocation factor; 1.0 for RC.
    pub relocation_factor: f64,
    pub dropped_ray_count: usize,
    /// Raw points that were inside the box (RC) when processing started.
    pub original_count: usize,
    pub model_id: Option<String>,
    pub flags: Vec<SetFlag>,
}

impl PseudoPointSet {
    fn empty(box_id: usize, source: PseudoSource, original_count: usize, flag: SetFlag) -> Self {
        Self {
            box_id,
            source,
            points: Vec::new(),
            intensity: 0.0,
            relocation_factor: 1.0,
            dropped_ray_count: 0,
            original_count,
            model_id: None,
            flags: vec![flag],
        }
    }

    pub fn has_flag(&self, f: SetFlag) -> bool {
        self.flags.contains(&f)
    }

    pub fn sidecar(&self) -> SidecarRecord {
        SidecarRecord {
            box_id: self.box_id,
            source: self.source,
            relocation_factor: self.relocation_factor,
            dropped_ray_count: self.dropped_ray_count,
            point_count: self.points.len(),
            flags: self.flags.clone(),
        }
    }
}

/// Per-box entry of the JSON sidecar written next to each augmented frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarRecord {
    pub box_id: usize,
    pub source: PseudoSource,
    pub relocation_factor: f64,
    pub dropped_ray_count: usize,
    pub point_count: usize,
    pub flags: Vec<SetFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpcgConfig {
    /// RC runs only on boxes with fewer interior points than this.
    pub rc_max_points_gate: usize,
    /// Planar distance range (meters) CF boxes are relocated into.
    pub cf_relocation_distance_range: [f64; 2],
    pub cf_min_points: usize,
    pub cf_intensity: f64,
    /// Base seed for CF distance draws; callers derive per-frame streams from it.
    pub seed: u64,
    pub point_match: PointMatchConfig,
}

impl Default for PpcgConfig {
    fn default() -> Self {
        Self {
            rc_max_points_gate: 300,
            cf_relocation_distance_range: [30.0, 60.0],
            cf_min_points: 5,
            cf_intensity: 0.5,
            seed: 0,
            point_match: PointMatchConfig::default(),
        }
    }
}

impl PpcgConfig {
    pub fn validate(&self) -> Result<(), String> {
        let [lo, hi] = self.cf_relocation_distance_range;
        if self.rc_max_points_gate == 0 {
            return Err("rc_max_points_gate must be > 0".into());
        }
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
            return Err(format!(
                "cf_relocation_distance_range [{lo}, {hi}] must satisfy 0 <= lo < hi"
            ));
        }
        if self.cf_min_points == 0 {
            return Err("cf_min_points must be >= 1".into());
        }
        Ok(())
    }
}

/// Nearest intersection of `ray` with the posed model.
fn shoot(
    ray: &Ray,
    posed: &PosedModel,
    sampler: Option<&PointSampler>,
    theta: f64,
) -> Option<Point3> {
    match &posed.geometry {
        PosedGeometry::Mesh { mesh, bvh } => bvh.cast_ray(mesh, ray).map(|h| h.point),
        PosedGeometry::Points(_) => sampler.and_then(|s| s.sample(ray, theta)),
    }
}

fn sampler_for(posed: &PosedModel, origin: Point3) -> Option<PointSampler> {
    match &posed.geometry {
        PosedGeometry::Points(p) => Some(PointSampler::new(p, origin)),
        PosedGeometry::Mesh { .. } => None,
    }
}

/// RC generation for one box. Each raw point defines a ray from the sensor
/// origin; the replacement is the model surface hit (mesh) or the shallowest
/// model point within the angular gate (point model). Rays without a result
/// are dropped and counted. Output order follows the surviving input order.
pub fn rc_ppcg_box(
    box_id: usize,
    raw_points: &[Point3],
    posed: &PosedModel,
    spec: &SensorSpec,
) -> PseudoPointSet {
    let theta = angular_threshold(spec);
    let sampler = sampler_for(posed, spec.origin);
    let mut points = Vec::with_capacity(raw_points.len());
    let mut dropped = 0;
    for &p in raw_points {
        let hit = Ray::through(spec.origin, p)
            .ok()
            .and_then(|ray| shoot(&ray, posed, sampler.as_ref(), theta));
        match hit {
            Some(q) => points.push(q),
            None => dropped += 1,
        }
    }
    PseudoPointSet {
        box_id,
        source: PseudoSource::Rc,
        points,
        intensity: 0.0,
        relocation_factor: 1.0,
        dropped_ray_count: dropped,
        original_count: raw_points.len(),
        model_id: Some(posed.model_id.clone()),
        flags: Vec::new(),
    }
}

/// Box moved outward along its planar direction: `(s x, s y, z)`.
pub fn relocate_box(b: &Box3D, s: f64) -> Box3D {
    Box3D {
        x: b.x * s,
        y: b.y * s,
        ..*b
    }
}

/// Relocation factor that puts the box's planar distance at `target_distance`,
/// never below 1.
pub fn relocation_factor_for(b: &Box3D, target_distance: f64) -> f64 {
    let r = b.x.hypot(b.y);
    if r < 1e-9 {
        return 1.0;
    }
    (target_distance / r).max(1.0)
}

/// Scans `model` placed in the box relocated by `s` and maps the hits back by
/// dividing X and Y by `s`. Z is unchanged.
pub fn cf_scan_relocated(b: &Box3D, model: &ShapeModel, spec: &SensorSpec, s: f64) -> Vec<Point3> {
    let moved = relocate_box(b, s);
    let Ok(posed) = align_model_to_box(model, &moved) else {
        return Vec::new();
    };
    let theta = angular_threshold(spec);
    let window = AzimuthWindow::around_box(spec.origin, &moved, 2.0 * theta);
    let pattern = generate_scan_rays(spec, window.as_ref());
    let sampler = sampler_for(&posed, spec.origin);
    pattern
        .rays
        .iter()
        .filter_map(|ray| shoot(ray, &posed, sampler.as_ref(), theta))
        .map(|p| Point3::new(p.x / s, p.y / s, p.z))
        .collect()
}

/// CF generation with an explicit relocation factor.
pub fn cf_ppcg_box_with_factor(
    box_id: usize,
    b: &Box3D,
    model: &ShapeModel,
    spec: &SensorSpec,
    cfg: &PpcgConfig,
    s: f64,
) -> PseudoPointSet {
    let mut flags = Vec::new();
    let mut s = s.max(1.0);
    let mut points = cf_scan_relocated(b, model, spec, s);
    if points.len() < cfg.cf_min_points && s > 1.0 {
        s = 1.0 + 0.5 * (s - 1.0);
        flags.push(SetFlag::Retried);
        points = cf_scan_relocated(b, model, spec, s);
    }
    if points.len() < cfg.cf_min_points {
        points.clear();
        flags.push(SetFlag::TooSparse);
    }
    PseudoPointSet {
        box_id,
        source: PseudoSource::Cf,
        points,
        intensity: cfg.cf_intensity,
        relocation_factor: s,
        dropped_ray_count: 0,
        original_count: 0,
        model_id: Some(model.id().to_string()),
        flags,
    }
}

/// Draws a target planar distance uniformly from the configured range and runs CF.
pub fn cf_ppcg_box<R: Rng + ?Sized>(
    box_id: usize,
    b: &Box3D,
    model: &ShapeModel,
    spec: &SensorSpec,
    cfg: &PpcgConfig,
    rng: &mut R,
) -> PseudoPointSet {
    let [lo, hi] = cfg.cf_relocation_distance_range;
    let target = rng.gen_range(lo..hi);
    cf_ppcg_box_with_factor(
        box_id,
        b,
        model,
        spec,
        cfg,
        relocation_factor_for(b, target),
    )
}

/// Box processing order for RC: decreasing interior count, then box index.
fn rc_order(interiors: &[Vec<usize>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..interiors.len()).collect();
    order.sort_by(|&a, &b| interiors[b].len().cmp(&interiors[a].len()).then(a.cmp(&b)));
    order
}

/// RC over a frame. Boxes below the gate get their interior points replaced by
/// pseudo points; boxes at or above it are left alone. Overlaps are resolved
/// by processing boxes in decreasing interior-count order, each point going to
/// the first box that claims it. Points outside every processed box keep their
/// order and bits; pseudo points are appended in processing order.
///
/// The returned sets are in processing order, one per box.
pub fn rc_ppcg_frame(
    frame: &Frame,
    boxes: &[Box3D],
    lib: &ModelLibrary,
    spec: &SensorSpec,
    cfg: &PpcgConfig,
) -> (Frame, Vec<PseudoPointSet>) {
    let interiors: Vec<Vec<usize>> = boxes
        .iter()
        .map(|b| points_in_box(&frame.points, b))
        .collect();
    let order = rc_order(&interiors);

    // Claim points sequentially so overlap resolution does not depend on scheduling.
    let mut claimed = vec![false; frame.len()];
    let mut jobs: Vec<(usize, Vec<usize>)> = Vec::with_capacity(boxes.len());
    for &bi in &order {
        let avail: Vec<usize> = interiors[bi]
            .iter()
            .copied()
            .filter(|&i| !claimed[i])
            .collect();
        for &i in &avail {
            claimed[i] = true;
        }
        jobs.push((bi, avail));
    }

    let sets: Vec<PseudoPointSet> = jobs
        .par_iter()
        .map(|(bi, avail)| {
            let bi = *bi;
            let n = avail.len();
            if n >= cfg.rc_max_points_gate {
                return PseudoPointSet::empty(bi, PseudoSource::Rc, n, SetFlag::Gated);
            }
            if n == 0 {
                return PseudoPointSet::empty(bi, PseudoSource::Rc, 0, SetFlag::NoInteriorPoints);
            }
            let raw: Vec<Point3> = avail.iter().map(|&i| frame.points[i]).collect();
            let posed = select_model(lib, &boxes[bi], &raw, spec.origin, &cfg.point_match)
                .ok()
                .and_then(|m| align_model_to_box(m, &boxes[bi]).ok());
            let Some(posed) = posed else {
                return PseudoPointSet::empty(bi, PseudoSource::Rc, n, SetFlag::SelectionFailed);
            };
            let mut set = rc_ppcg_box(bi, &raw, &posed, spec);
            set.intensity = avail.iter().map(|&i| frame.intensities[i]).sum::<f64>() / n as f64;
            if set.points.is_empty() {
                set.flags.push(SetFlag::EmptyFallback);
            }
            set
        })
        .collect();

    let mut removed = vec![false; frame.len()];
    for ((_, avail), set) in jobs.iter().zip(&sets) {
        if !set.points.is_empty() {
            for &i in avail {
                removed[i] = true;
            }
        }
    }
    let mut out = Frame {
        id: frame.id.clone(),
        sensor_id: frame.sensor_id.clone(),
        points: Vec::with_capacity(frame.len()),
        intensities: Vec::with_capacity(frame.len()),
    };
    for (i, (&p, &it)) in frame.points.iter().zip(&frame.intensities).enumerate() {
        if !removed[i] {
            out.push(p, it);
        }
    }
    for set in &sets {
        for &p in &set.points {
            out.push(p, set.intensity);
        }
    }
    (out, sets)
}

/// CF over a frame. The frame itself is returned unchanged; one CF set per box,
/// in box order. Relocation distances are drawn from `rng` in box order before
/// any scanning, so results do not depend on scheduling.
pub fn cf_ppcg_frame<R: Rng + ?Sized>(
    frame: &Frame,
    boxes: &[Box3D],
    lib: &ModelLibrary,
    spec: &SensorSpec,
    cfg: &PpcgConfig,
    rng: &mut R,
) -> (Frame, Vec<PseudoPointSet>) {
    let [lo, hi] = cfg.cf_relocation_distance_range;
    let targets: Vec<f64> = boxes.iter().map(|_| rng.gen_range(lo..hi)).collect();
    let sets = boxes
        .par_iter()
        .zip(targets.par_iter())
        .enumerate()
        .map(|(bi, (b, &target))| {
            let raw: Vec<Point3> = points_in_box(&frame.points, b)
                .into_iter()
                .map(|i| frame.points[i])
                .collect();
            match select_model(lib, b, &raw, spec.origin, &cfg.point_match) {
                Ok(model) => cf_ppcg_box_with_factor(
                    bi,
                    b,
                    model,
                    spec,
                    cfg,
                    relocation_factor_for(b, target),
                ),
                Err(_) => PseudoPointSet::empty(bi, PseudoSource::Cf, 0, SetFlag::SelectionFailed),
            }
        })
        .collect();
    (frame.clone(), sets)
}

/// Collects CF sets into a stand-alone training frame with id `<frame>_cf`.
pub fn cf_sample_frame(frame: &Frame, sets: &[PseudoPointSet]) -> Frame {
    let mut out = Frame {
        id: format!("{}_cf", frame.id),
        sensor_id: frame.sensor_id.clone(),
        points: Vec::new(),
        intensities: Vec::new(),
    };
    for s in sets {
        for &p in &s.points {
            out.push(p, s.intensity);
        }
    }
    out
}

/// Per-frame seed derived from a run seed and the frame id (FNV-1a).
pub fn frame_seed(seed: u64, frame_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in frame_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
