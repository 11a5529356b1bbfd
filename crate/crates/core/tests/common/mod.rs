//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use denoise_core::frame::Frame;
use denoise_core::geom::{Box3D, Point3, Ray, Triangle};
use denoise_core::models::{align_model_to_box, MeshModel, PosedModel, ShapeModel};
use denoise_core::procedural;
use denoise_core::ptsn::{DetectionSet, Detector, PtsnError};
use rand::Rng;

pub const WAYMO_MEAN: [f64; 3] = [4.66, 2.08, 1.73];
pub const KITTI_MEAN: [f64; 3] = [3.89, 1.62, 1.53];

/// Plane-equation intersection followed by a barycentric inside test.
pub fn plane_oracle(ray: &Ray, tri: &Triangle) -> Option<f64> {
    let e1 = tri.v1 - tri.v0;
    let e2 = tri.v2 - tri.v0;
    let n = e1.cross(e2);
    let denom = n.dot(ray.direction);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = n.dot(tri.v0 - ray.origin) / denom;
    if t < 1e-9 {
        return None;
    }
    let p = ray.origin + ray.direction * t;
    let w = p - tri.v0;
    let (d00, d01, d11) = (e1.dot(e1), e1.dot(e2), e2.dot(e2));
    let (d20, d21) = (w.dot(e1), w.dot(e2));
    let den = d00 * d11 - d01 * d01;
    let v = (d11 * d20 - d01 * d21) / den;
    let u2 = (d00 * d21 - d01 * d20) / den;
    (v >= 0.0 && u2 >= 0.0 && v + u2 <= 1.0).then_some(t)
}

/// Signed distance of `p` from the boundary of the plane-barycentric region; used
/// to skip pairs that graze an edge where two exact methods may legitimately differ.
pub fn edge_margin(ray: &Ray, tri: &Triangle) -> f64 {
    let e1 = tri.v1 - tri.v0;
    let e2 = tri.v2 - tri.v0;
    let n = e1.cross(e2);
    let denom = n.dot(ray.direction);
    if denom == 0.0 {
        return 0.0;
    }
    let t = n.dot(tri.v0 - ray.origin) / denom;
    let p = ray.origin + ray.direction * t;
    let w = p - tri.v0;
    let (d00, d01, d11) = (e1.dot(e1), e1.dot(e2), e2.dot(e2));
    let (d20, d21) = (w.dot(e1), w.dot(e2));
    let den = d00 * d11 - d01 * d01;
    let v = (d11 * d20 - d01 * d21) / den;
    let u2 = (d00 * d21 - d01 * d20) / den;
    v.abs()
        .min(u2.abs())
        .min((1.0 - v - u2).abs())
        .min(t.abs())
        .min((denom / n.norm()).abs())
}

pub fn random_point<R: Rng>(rng: &mut R, r: f64) -> Point3 {
    Point3::new(
        rng.gen_range(-r..r),
        rng.gen_range(-r..r),
        rng.gen_range(-r..r),
    )
}

/// Triangle in [-1, 1]^3 and a ray aimed near it, about half of them hitting.
pub fn random_pair<R: Rng>(rng: &mut R) -> (Ray, Triangle) {
    let tri = Triangle {
        v0: random_point(rng, 1.0),
        v1: random_point(rng, 1.0),
        v2: random_point(rng, 1.0),
    };
    let origin = random_point(rng, 3.0);
    let target = tri.centroid() + random_point(rng, 0.8);
    let ray = Ray::through(origin, target)
        .unwrap_or_else(|_| Ray::new(origin, Point3::new(1.0, 0.0, 0.0)).unwrap());
    (ray, tri)
}

/// Box membership: inverse-rotate into the box frame and compare half dims.
pub fn in_box_oracle(p: Point3, b: &Box3D) -> bool {
    let (dx, dy, dz) = (p.x - b.x, p.y - b.y, p.z - b.z);
    let (s, c) = b.heading.sin_cos();
    let lx = c * dx + s * dy;
    let ly = -s * dx + c * dy;
    lx.abs() <= 0.5 * b.l && ly.abs() <= 0.5 * b.w && dz.abs() <= 0.5 * b.h
}

/// Linear scan: closest point (ties to lower index) whose angle to `dir` is below `theta`.
pub fn sampler_oracle(origin: Point3, dir: Point3, pts: &[Point3], theta: f64) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (i, &q) in pts.iter().enumerate() {
        let v = q - origin;
        let depth = v.norm();
        if depth == 0.0 {
            continue;
        }
        let angle = v.cross(dir).norm().atan2(v.dot(dir));
        if angle < theta && best.is_none_or(|(d, _)| depth < d) {
            best = Some((depth, i));
        }
    }
    best.map(|(_, i)| i)
}

/// Unit-radius sphere model in canonical pose (center at z = 1).
pub fn sphere_model(slices: u32, stacks: u32) -> ShapeModel {
    let mesh = procedural::uv_sphere(Point3::ZERO, 1.0, slices, stacks);
    ShapeModel::Mesh(MeshModel::from_mesh("sphere", mesh).unwrap())
}

/// Box that poses the unit sphere model with its center at `c`.
pub fn sphere_box(model: &ShapeModel, c: Point3) -> Box3D {
    let d = model.canonical_dims();
    Box3D::new(c.x, c.y, c.z, d.x, d.y, d.z, 0.0).unwrap()
}

pub fn posed_sphere(slices: u32, stacks: u32, c: Point3) -> (PosedModel, Box3D) {
    let m = sphere_model(slices, stacks);
    let b = sphere_box(&m, c);
    (align_model_to_box(&m, &b).unwrap(), b)
}

/// Largest gap between a uv-sphere facet and the true sphere, as a fraction of the radius.
pub fn uv_sphere_sagitta(slices: u32, stacks: u32) -> f64 {
    let da = std::f64::consts::TAU / slices as f64;
    let dp = std::f64::consts::PI / stacks as f64;
    1.0 - (0.5 * da).cos() * (0.5 * dp).cos()
}

/// Points on the true sphere facing `origin`.
pub fn visible_sphere_points<R: Rng>(
    rng: &mut R,
    c: Point3,
    r: f64,
    origin: Point3,
    n: usize,
) -> Vec<Point3> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v = random_point(rng, 1.0);
        let len = v.norm();
        if !(0.1..=1.0).contains(&len) {
            continue;
        }
        let p = c + v * (r / len);
        if (p - c).dot(origin - p) > 0.05 * r {
            out.push(p);
        }
    }
    out
}

/// Returns a fixed list of boxes (in scaled coordinates) for every frame.
pub struct ListDetector(pub Vec<(Box3D, f64)>);

impl Detector for ListDetector {
    fn detect(&self, frame: &Frame, _scale: f64) -> Result<DetectionSet, PtsnError> {
        let mut d = DetectionSet::new(frame.id.clone());
        for &(b, c) in &self.0 {
            d.push(b, c);
        }
        Ok(d)
    }
}

pub fn random_box<R: Rng>(rng: &mut R) -> Box3D {
    Box3D::new(
        rng.gen_range(-60.0..60.0),
        rng.gen_range(-60.0..60.0),
        rng.gen_range(-1.0..3.0),
        rng.gen_range(0.5..8.0),
        rng.gen_range(0.5..3.0),
        rng.gen_range(0.5..3.0),
        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    )
    .unwrap()
}
