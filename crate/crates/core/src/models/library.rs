use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::frame::Frame;
use crate::geom::{
    angle_distance, normalize_angle, points_in_box, Box3D, Bvh, KdTree, Point3, TriangleMesh,
};
use crate::io::{self, Label};

/// Canonical dimensions below this are treated as degenerate.
pub const MIN_CANONICAL_DIM: f64 = 1e-6;

/// Cell size of the dimension index, meters.
const DIMS_BUCKET: f64 = 0.25;
/// Width of an observation-angle bucket, radians (30 degrees).
const ANGLE_BUCKET: f64 = std::f64::consts::PI / 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LibraryKind {
    Cad,
    Point,
}

/// CAD model in canonical pose: length along +X, centered in XY, bottom at z = 0.
#[derive(Debug, Clone)]
pub struct MeshModel {
    pub id: String,
    pub mesh: TriangleMesh,
    pub bvh: Bvh,
    pub canonical_dims: Point3,
}

impl MeshModel {
    /// Moves `mesh` into canonical pose and measures its tight box.
    pub fn from_mesh(id: impl Into<String>, mesh: TriangleMesh) -> Result<Self, ModelError> {
        let id = id.into();
        let aabb = mesh.aabb();
        let c = aabb.center();
        let shift = Point3::new(c.x, c.y, aabb.min.z);
        let mesh = if shift == Point3::ZERO {
            mesh
        } else {
            mesh.map_vertices(|v| v - shift)
        };
        let canonical_dims = mesh.aabb().extent();
        let bvh = Bvh::build(&mesh).map_err(|source| ModelError::Geom {
            id: id.clone(),
            source,
        })?;
        Ok(Self {
            id,
            mesh,
            bvh,
            canonical_dims,
        })
    }
}

/// Dense object instance harvested from annotated scans, in canonical pose.
#[derive(Debug, Clone)]
pub struct PointModel {
    pub id: String,
    pub points: Vec<Point3>,
    /// Heading relative to the sensor-to-center direction when captured, radians.
    pub source_observation_angle: f64,
    /// Planar sensor-to-center distance when captured, meters.
    pub source_distance: f64,
    pub canonical_dims: Point3,
    normalized: KdTree,
}

impl PointModel {
    pub fn new(
        id: impl Into<String>,
        points: Vec<Point3>,
        canonical_dims: Point3,
        source_observation_angle: f64,
        source_distance: f64,
    ) -> Self {
        let normalized = KdTree::new(normalize_to_unit(&points, canonical_dims));
        Self {
            id: id.into(),
            points,
            source_observation_angle: normalize_angle(source_observation_angle),
            source_distance,
            canonical_dims,
            normalized,
        }
    }

    /// Points divided by the canonical dims, as a search tree.
    pub fn normalized(&self) -> &KdTree {
        &self.normalized
    }

    /// Number of points inside the canonical box (bottom at z = 0), inclusive, with 1e-6 slack.
    pub fn interior_count(&self) -> usize {
        canonical_box(self.canonical_dims).map_or(0, |b| {
            self.points
                .iter()
                .filter(|p| b.contains_with_margin(**p, 1e-6))
                .count()
        })
    }
}

/// Canonical box of given dims: centered in XY, bottom at z = 0.
pub fn canonical_box(dims: Point3) -> Option<Box3D> {
    Box3D::new(0.0, 0.0, 0.5 * dims.z, dims.x, dims.y, dims.z, 0.0).ok()
}

pub(crate) fn normalize_to_unit(points: &[Point3], dims: Point3) -> Vec<Point3> {
    points
        .iter()
        .map(|p| Point3::new(p.x / dims.x, p.y / dims.y, p.z / dims.z))
        .collect()
}

/// Angle between a box's heading and the planar ray from `sensor` to its center.
pub fn observation_angle(b: &Box3D, sensor: Point3) -> f64 {
    let d = b.center() - sensor;
    normalize_angle(b.heading - d.y.atan2(d.x))
}

#[derive(Debug, Clone)]
pub enum ShapeModel {
    Mesh(MeshModel),
    Points(PointModel),
}

impl ShapeModel {
    pub fn id(&self) -> &str {
        match self {
            Self::Mesh(m) => &m.id,
            Self::Points(m) => &m.id,
        }
    }

    pub fn canonical_dims(&self) -> Point3 {
        match self {
            Self::Mesh(m) => m.canonical_dims,
            Self::Points(m) => m.canonical_dims,
        }
    }

    pub fn kind(&self) -> LibraryKind {
        match self {
            Self::Mesh(_) => LibraryKind::Cad,
            Self::Points(_) => LibraryKind::Point,
        }
    }
}

/// Asset acceptance rules. Category and year checks apply only where the
/// manifest carries that metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LibraryFilter {
    pub min_length: f64,
    pub max_length: f64,
    pub min_points: usize,
    pub excluded_categories: Vec<String>,
    pub min_year: Option<u32>,
}

impl Default for LibraryFilter {
    fn default() -> Self {
        Self {
            min_length: 2.0,
            max_length: 8.0,
            min_points: 300,
            excluded_categories: vec!["emergency".to_string()],
            min_year: Some(2000),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LibraryReport {
    pub accepted: Vec<String>,
    pub rejected: Vec<Rejection>,
    /// Degenerate triangles dropped while loading meshes, summed over assets.
    pub degenerate_triangles: usize,
}

impl LibraryReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "accepted {}", self.accepted.len()).unwrap();
        writeln!(s, "rejected {}", self.rejected.len()).unwrap();
        writeln!(
            s,
            "degenerate_triangles_dropped {}",
            self.degenerate_triangles
        )
        .unwrap();
        for r in &self.rejected {
            writeln!(s, "reject {} {}", r.id, r.reason).unwrap();
        }
        s
    }

    fn reject(&mut self, id: &str, reason: impl Into<String>) {
        self.rejected.push(Rejection {
            id: id.to_string(),
            reason: reason.into(),
        });
    }
}

/// One entry of the on-disk library manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub dims_lwh_m: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation_angle_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryManifest {
    pub kind: LibraryKind,
    pub entries: Vec<ManifestEntry>,
}

impl LibraryManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| io::IoError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| ModelError::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| {
            ModelError::Io(io::IoError::Io {
                path: path.to_path_buf(),
                source: e,
            })
        })
    }
}

/// The model library: immutable after build, entries sorted by id.
#[derive(Debug, Clone)]
pub struct ModelLibrary {
    kind: LibraryKind,
    entries: Vec<ShapeModel>,
    dims_index: BTreeMap<[i64; 3], Vec<usize>>,
    angle_index: BTreeMap<i64, Vec<usize>>,
    report: LibraryReport,
}

fn dims_key(d: Point3) -> [i64; 3] {
    [
        (d.x / DIMS_BUCKET).floor() as i64,
        (d.y / DIMS_BUCKET).floor() as i64,
        (d.z / DIMS_BUCKET).floor() as i64,
    ]
}

fn angle_buckets() -> i64 {
    (std::f64::consts::TAU / ANGLE_BUCKET).round() as i64
}

fn angle_key(a: f64) -> i64 {
    let k = ((normalize_angle(a) + std::f64::consts::PI) / ANGLE_BUCKET).floor() as i64;
    k.rem_euclid(angle_buckets())
}

impl ModelLibrary {
    fn assemble(
        kind: LibraryKind,
        mut entries: Vec<ShapeModel>,
        report: LibraryReport,
    ) -> Result<Self, ModelError> {
        if entries.is_empty() {
            return Err(ModelError::NoAssets);
        }
        entries.sort_by(|a, b| a.id().cmp(b.id()));
        if let Some(w) = entries.windows(2).find(|w| w[0].id() == w[1].id()) {
            return Err(ModelError::DuplicateId(w[0].id().to_string()));
        }
        let mut dims_index: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
        let mut angle_index: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            dims_index
                .entry(dims_key(e.canonical_dims()))
                .or_default()
                .push(i);
            if let ShapeModel::Points(p) = e {
                angle_index
                    .entry(angle_key(p.source_observation_angle))
                    .or_default()
                    .push(i);
            }
        }
        Ok(Self {
            kind,
            entries,
            dims_index,
            angle_index,
            report,
        })
    }

    /// CAD library from in-memory meshes, applying the length filter.
    pub fn from_meshes(
        meshes: Vec<(String, TriangleMesh)>,
        filter: &LibraryFilter,
    ) -> Result<Self, ModelError> {
        let mut report = LibraryReport::default();
        let mut entries = Vec::new();
        for (id, mesh) in meshes {
            if let Some(m) = accept_mesh(&id, mesh, filter, &mut report)? {
                entries.push(ShapeModel::Mesh(m));
            }
        }
        Self::assemble(LibraryKind::Cad, entries, report)
    }

    /// POINT library from in-memory instances, applying the point-count gate.
    pub fn from_point_models(
        models: Vec<PointModel>,
        filter: &LibraryFilter,
    ) -> Result<Self, ModelError> {
        let mut report = LibraryReport::default();
        let mut entries = Vec::new();
        for m in models {
            if let Some(m) = accept_points(m, filter, &mut report) {
                entries.push(ShapeModel::Points(m));
            }
        }
        Self::assemble(LibraryKind::Point, entries, report)
    }

    pub fn kind(&self) -> LibraryKind {
        self.kind
    }

    pub fn entries(&self) -> &[ShapeModel] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ShapeModel> {
        self.entries
            .binary_search_by(|e| e.id().cmp(id))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn report(&self) -> &LibraryReport {
        &self.report
    }

    /// Occupied dimension buckets ordered by Chebyshev distance (in buckets) from
    /// the bucket of `dims`.
    pub(crate) fn dims_buckets_by_ring(&self, dims: Point3) -> Vec<(i64, &[usize])> {
        let q = dims_key(dims);
        let mut out: Vec<(i64, &[usize])> = self
            .dims_index
            .iter()
            .map(|(k, v)| {
                let ring = (0..3).map(|a| (k[a] - q[a]).abs()).max().unwrap();
                (ring, v.as_slice())
            })
            .collect();
        out.sort_by_key(|(r, _)| *r);
        out
    }

    pub(crate) fn dims_bucket_size() -> f64 {
        DIMS_BUCKET
    }

    /// Entry indices whose observation angle is within `tolerance` of `angle`,
    /// ascending. Uses the angle buckets to skip far entries.
    pub(crate) fn point_candidates(&self, angle: f64, tolerance: Option<f64>) -> Vec<usize> {
        let Some(tol) = tolerance else {
            return (0..self.entries.len()).collect();
        };
        let n = angle_buckets();
        let reach = (tol / ANGLE_BUCKET).ceil() as i64 + 1;
        let center = angle_key(angle);
        let mut keys: Vec<i64> = (-reach..=reach)
            .map(|d| (center + d).rem_euclid(n))
            .collect();
        keys.sort();
        keys.dedup();
        let mut out: Vec<usize> = keys
            .iter()
            .filter_map(|k| self.angle_index.get(k))
            .flatten()
            .copied()
            .filter(|&i| match &self.entries[i] {
                ShapeModel::Points(p) => angle_distance(p.source_observation_angle, angle) <= tol,
                ShapeModel::Mesh(_) => true,
            })
            .collect();
        out.sort_unstable();
        out
    }
}

fn accept_mesh(
    id: &str,
    mesh: TriangleMesh,
    filter: &LibraryFilter,
    report: &mut LibraryReport,
) -> Result<Option<MeshModel>, ModelError> {
    if mesh.triangle_count() == 0 {
        report.reject(id, "no non-degenerate triangles");
        return Ok(None);
    }
    let model = MeshModel::from_mesh(id, mesh)?;
    let len = model.canonical_dims.x;
    if len > filter.max_length {
        report.reject(id, format!("length>{}m", filter.max_length));
        return Ok(None);
    }
    if len < filter.min_length {
        report.reject(id, format!("length<{}m", filter.min_length));
        return Ok(None);
    }
    if model.canonical_dims.y <= MIN_CANONICAL_DIM || model.canonical_dims.z <= MIN_CANONICAL_DIM {
        report.reject(id, "degenerate dims");
        return Ok(None);
    }
    report.accepted.push(id.to_string());
    Ok(Some(model))
}

fn accept_points(
    m: PointModel,
    filter: &LibraryFilter,
    report: &mut LibraryReport,
) -> Option<PointModel> {
    let d = m.canonical_dims;
    if !(d.x > MIN_CANONICAL_DIM && d.y > MIN_CANONICAL_DIM && d.z > MIN_CANONICAL_DIM) {
        report.reject(&m.id, "degenerate dims");
        return None;
    }
    let b = canonical_box(d)?;
    let interior: Vec<Point3> = m
        .points
        .iter()
        .copied()
        .filter(|p| b.contains_with_margin(*p, 1e-6))
        .collect();
    if interior.len() < filter.min_points {
        report.reject(
            &m.id,
            format!("points<{} ({})", filter.min_points, interior.len()),
        );
        return None;
    }
    report.accepted.push(m.id.clone());
    Some(PointModel::new(
        m.id,
        interior,
        d,
        m.source_observation_angle,
        m.source_distance,
    ))
}

fn metadata_rejection(e: &ManifestEntry, filter: &LibraryFilter) -> Option<String> {
    if let Some(cat) = &e.category {
        if filter
            .excluded_categories
            .iter()
            .any(|c| c.eq_ignore_ascii_case(cat))
        {
            return Some(format!("category={cat}"));
        }
    }
    if let (Some(year), Some(min)) = (e.year, filter.min_year) {
        if year < min {
            return Some(format!("year<{min}"));
        }
    }
    None
}

/// Loads the assets listed in a library manifest. Unreadable assets are
/// skipped and listed in the report with their error.
pub fn build_library(
    manifest_path: impl AsRef<Path>,
    kind: LibraryKind,
    filter: &LibraryFilter,
) -> Result<ModelLibrary, ModelError> {
    let manifest_path = manifest_path.as_ref();
    let manifest = LibraryManifest::load(manifest_path)?;
    if manifest.kind != kind {
        return Err(ModelError::WrongKind {
            expected: kind,
            found: manifest.kind,
        });
    }
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    let mut report = LibraryReport::default();
    let mut entries = Vec::new();
    for e in &manifest.entries {
        if let Some(reason) = metadata_rejection(e, filter) {
            report.reject(&e.id, reason);
            continue;
        }
        let path = base.join(&e.path);
        match kind {
            LibraryKind::Cad => match io::read_mesh(&path) {
                Ok((mesh, clean)) => {
                    report.degenerate_triangles += clean.degenerate_dropped;
                    if let Some(m) = accept_mesh(&e.id, mesh, filter, &mut report)? {
                        entries.push(ShapeModel::Mesh(m));
                    }
                }
                Err(err) => report.reject(&e.id, format!("parse error: {err}")),
            },
            LibraryKind::Point => match io::read_ply_points(&path) {
                Ok((points, _)) => {
                    let m = PointModel::new(
                        e.id.clone(),
                        points,
                        e.dims_lwh_m.into(),
                        e.observation_angle_deg.unwrap_or(0.0).to_radians(),
                        e.distance_m.unwrap_or(0.0),
                    );
                    if let Some(m) = accept_points(m, filter, &mut report) {
                        entries.push(ShapeModel::Points(m));
                    }
                }
                Err(err) => report.reject(&e.id, format!("parse error: {err}")),
            },
        }
    }
    ModelLibrary::assemble(kind, entries, report)
}

/// Cuts annotated instances out of a frame and re-expresses them in canonical
/// pose. No point-count gate is applied here; that happens at library build.
pub fn extract_point_models(
    frame: &Frame,
    labels: &[Label],
    sensor_origin: Point3,
    id_prefix: &str,
) -> Vec<PointModel> {
    labels
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let b = &l.bbox;
            let lift = Point3::new(0.0, 0.0, 0.5 * b.h);
            let points = points_in_box(&frame.points, b)
                .into_iter()
                .map(|i| b.to_local(frame.points[i]) + lift)
                .collect();
            let d = b.center() - sensor_origin;
            PointModel::new(
                format!("{id_prefix}{k:04}"),
                points,
                b.dims(),
                observation_angle(b, sensor_origin),
                d.planar_norm(),
            )
        })
        .collect()
}

/// Writes point models as binary PLY files plus a POINT manifest in `dir`.
pub fn save_point_library(
    models: &[PointModel],
    dir: impl AsRef<Path>,
) -> Result<PathBuf, ModelError> {
    let dir = dir.as_ref();
    let mut entries = Vec::new();
    for m in models {
        let rel = PathBuf::from(format!("{}.ply", m.id));
        io::write_ply(&m.points, &vec![0.0; m.points.len()], dir.join(&rel))?;
        entries.push(ManifestEntry {
            id: m.id.clone(),
            path: rel,
            dims_lwh_m: m.canonical_dims.to_array(),
            observation_angle_deg: Some(m.source_observation_angle.to_degrees()),
            point_count: Some(m.points.len()),
            distance_m: Some(m.source_distance),
            category: None,
            year: None,
        });
    }
    let path = dir.join("library.json");
    LibraryManifest {
        kind: LibraryKind::Point,
        entries,
    }
    .save(&path)?;
    Ok(path)
}

/// Writes meshes as OBJ files plus a CAD manifest in `dir`.
pub fn save_mesh_library(
    meshes: &[(String, TriangleMesh)],
    dir: impl AsRef<Path>,
) -> Result<PathBuf, ModelError> {
    let dir = dir.as_ref();
    let mut entries = Vec::new();
    for (id, mesh) in meshes {
        let rel = PathBuf::from(format!("{id}.obj"));
        io::write_obj(mesh, dir.join(&rel))?;
        entries.push(ManifestEntry {
            id: id.clone(),
            path: rel,
            dims_lwh_m: mesh.aabb().extent().to_array(),
            observation_angle_deg: None,
            point_count: None,
            distance_m: None,
            category: None,
            year: None,
        });
    }
    let path = dir.join("library.json");
    LibraryManifest {
        kind: LibraryKind::Cad,
        entries,
    }
    .save(&path)?;
    Ok(path)
}
