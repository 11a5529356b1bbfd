use serde::{Deserialize, Serialize};

use super::{GeomError, Point3, Vec3};

/// Determinant magnitude below which a ray is treated as parallel to a triangle.
pub const DET_EPSILON: f64 = 1e-12;

/// Hits closer than this (meters) are discarded to avoid self-intersection.
pub const MIN_HIT_T: f64 = 1e-9;

/// Half-line with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Point3,
    pub direction: Vec3,
}

impl Ray {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Point3, direction: Vec3) -> Result<Self, GeomError> {
        let direction = direction.normalized().ok_or(GeomError::ZeroDirection)?;
        if !origin.is_finite() {
            return Err(GeomError::NonFinite);
        }
        Ok(Self { origin, direction })
    }

    /// Ray from `origin` passing through `target`.
    pub fn through(origin: Point3, target: Point3) -> Result<Self, GeomError> {
        Self::new(origin, target - origin)
    }

    pub fn at(&self, t: f64) -> Point3 {
        self.origin + self.direction * t
    }

    /// Distance of `p` from the supporting line, `|(p - o) x d|`.
    pub fn colinearity_residual(&self, p: Point3) -> f64 {
        (p - self.origin).cross(self.direction).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    pub v0: Point3,
    pub v1: Point3,
    pub v2: Point3,
}

impl Triangle {
    pub const fn new(v0: Point3, v1: Point3, v2: Point3) -> Self {
        Self { v0, v1, v2 }
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.v1 - self.v0).cross(self.v2 - self.v0).norm()
    }

    pub fn centroid(&self) -> Point3 {
        (self.v0 + self.v1 + self.v2) / 3.0
    }
}

/// First forward intersection of a ray with a surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayHit {
    pub t: f64,
    pub point: Point3,
    pub triangle: usize,
    pub u: f64,
    pub v: f64,
}

impl RayHit {
    /// Ordering used everywhere a nearest hit is chosen: lowest t, then lowest triangle index.
    pub fn is_closer_than(&self, other: &RayHit) -> bool {
        self.t < other.t || (self.t == other.t && self.triangle < other.triangle)
    }
}

/// Moller-Trumbore intersection. `triangle` is the index reported in the hit.
pub fn intersect_triangle(ray: &Ray, tri: &Triangle, triangle: usize) -> Option<RayHit> {
    let e1 = tri.v1 - tri.v0;
    let e2 = tri.v2 - tri.v0;
    let pvec = ray.direction.cross(e2);
    let det = e1.dot(pvec);
    if det.abs() < DET_EPSILON {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = ray.origin - tri.v0;
    let u = tvec.dot(pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(e1);
    let v = ray.direction.dot(qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(qvec) * inv_det;
    if !(t >= MIN_HIT_T) {
        return None;
    }
    Some(RayHit {
        t,
        point: ray.at(t),
        triangle,
        u,
        v,
    })
}

/// Single ray/triangle query; the reported triangle index is 0.
pub fn ray_triangle_intersect(ray: &Ray, tri: &Triangle) -> Option<RayHit> {
    intersect_triangle(ray, tri, 0)
}
