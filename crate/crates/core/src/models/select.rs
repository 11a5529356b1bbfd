use serde::{Deserialize, Serialize};

use super::chamfer::chamfer_distance;
use super::library::{normalize_to_unit, observation_angle, LibraryKind, ModelLibrary, ShapeModel};
use super::ModelError;
use crate::geom::{Box3D, KdTree, Point3};

/// Staged observation-angle tolerances for point-model matching, radians.
/// `None` disables the filter. The first stage with any candidate wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMatchConfig {
    pub angle_stages: Vec<Option<f64>>,
}

impl Default for PointMatchConfig {
    fn default() -> Self {
        Self {
            angle_stages: vec![Some(30f64.to_radians()), Some(90f64.to_radians()), None],
        }
    }
}

/// Index of the entry whose canonical dims are nearest (L2) to the box dims;
/// ties go to the lowest id. Works for either library kind.
pub fn select_by_dims(lib: &ModelLibrary, b: &Box3D) -> Result<usize, ModelError> {
    if lib.is_empty() {
        return Err(ModelError::EmptyLibrary);
    }
    let target = b.dims();
    let q = ModelLibrary::dims_bucket_size();
    let mut best: Option<(f64, usize)> = None;
    let rings = lib.dims_buckets_by_ring(target);
    let mut k = 0;
    while k < rings.len() {
        let ring = rings[k].0;
        // Everything beyond this ring is farther than (ring * q) from the target.
        if let Some((d2, _)) = best {
            let bound = (ring as f64 - 1.0) * q - 1e-9;
            if bound > 0.0 && d2 < bound * bound {
                break;
            }
        }
        while k < rings.len() && rings[k].0 == ring {
            for &i in rings[k].1 {
                let d2 = lib.entries()[i].canonical_dims().distance_squared(target);
                if best.is_none_or(|(bd, bi)| d2 < bd || (d2 == bd && i < bi)) {
                    best = Some((d2, i));
                }
            }
            k += 1;
        }
    }
    Ok(best.expect("non-empty library").1)
}

/// Model with minimal size deviation from the box.
pub fn select_best_cad<'a>(lib: &'a ModelLibrary, b: &Box3D) -> Result<&'a ShapeModel, ModelError> {
    Ok(&lib.entries()[select_by_dims(lib, b)?])
}

/// Query points expressed in the box frame, bottom at z = 0, scaled to unit dims.
pub fn normalize_query(b: &Box3D, raw_points: &[Point3]) -> Vec<Point3> {
    let lift = Point3::new(0.0, 0.0, 0.5 * b.h);
    let local: Vec<Point3> = raw_points.iter().map(|&p| b.to_local(p) + lift).collect();
    normalize_to_unit(&local, b.dims())
}

/// Point model with a comparable observation angle and the smallest Chamfer
/// distance to the box's points, both sides normalized to unit dims.
pub fn select_best_point_model<'a>(
    lib: &'a ModelLibrary,
    b: &Box3D,
    raw_points: &[Point3],
    sensor_origin: Point3,
    cfg: &PointMatchConfig,
) -> Result<&'a ShapeModel, ModelError> {
    if lib.kind() != LibraryKind::Point {
        return Err(ModelError::WrongKind {
            expected: LibraryKind::Point,
            found: lib.kind(),
        });
    }
    if lib.is_empty() {
        return Err(ModelError::EmptyLibrary);
    }
    if raw_points.is_empty() {
        return Err(ModelError::NoQueryPoints);
    }
    let angle = observation_angle(b, sensor_origin);
    let query = KdTree::new(normalize_query(b, raw_points));
    let mut stages = cfg.angle_stages.clone();
    if stages.last() != Some(&None) {
        stages.push(None);
    }
    for tol in stages {
        let candidates = lib.point_candidates(angle, tol);
        if candidates.is_empty() {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for i in candidates {
            let ShapeModel::Points(m) = &lib.entries()[i] else {
                continue;
            };
            let d = chamfer_distance(&query, m.normalized());
            if best.is_none_or(|(bd, bi)| d < bd || (d == bd && i < bi)) {
                best = Some((d, i));
            }
        }
        if let Some((_, i)) = best {
            return Ok(&lib.entries()[i]);
        }
    }
    Err(ModelError::EmptyLibrary)
}

/// Dispatches on the library kind. POINT libraries fall back to dims when the
/// box holds no points.
pub fn select_model<'a>(
    lib: &'a ModelLibrary,
    b: &Box3D,
    raw_points: &[Point3],
    sensor_origin: Point3,
    cfg: &PointMatchConfig,
) -> Result<&'a ShapeModel, ModelError> {
    match lib.kind() {
        LibraryKind::Point if !raw_points.is_empty() => {
            select_best_point_model(lib, b, raw_points, sensor_origin, cfg)
        }
        _ => select_best_cad(lib, b),
    }
}
