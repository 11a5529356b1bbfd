use serde::{Deserialize, Serialize};

use super::{normalize_angle, Aabb, GeomError, Point3};

/// Oriented 3D box: center, dimensions along its own length/width/height axes,
/// and a yaw about +Z. `z` is the center height, so the bottom face sits at `z - h/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub heading: f64,
}

impl Box3D {
    pub fn new(
        x: f64,
        y: f64,
        z: f64,
        l: f64,
        w: f64,
        h: f64,
        heading: f64,
    ) -> Result<Self, GeomError> {
        let b = Self {
            x,
            y,
            z,
            l,
            w,
            h,
            heading: normalize_angle(heading),
        };
        b.check()?;
        Ok(b)
    }

    pub fn check(&self) -> Result<(), GeomError> {
        let all = [self.x, self.y, self.z, self.l, self.w, self.h, self.heading];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        if self.l <= 0.0 || self.w <= 0.0 || self.h <= 0.0 {
            return Err(GeomError::NonPositiveDims {
                l: self.l,
                w: self.w,
                h: self.h,
            });
        }
        Ok(())
    }

    pub fn center(&self) -> Point3 {
        Point3::new(self.x, self.y, self.z)
    }

    pub fn dims(&self) -> Point3 {
        Point3::new(self.l, self.w, self.h)
    }

    pub fn bottom_z(&self) -> f64 {
        self.z - 0.5 * self.h
    }

    pub fn volume(&self) -> f64 {
        self.l * self.w * self.h
    }

    /// World point expressed in the box frame (origin at the center, +X along the heading).
    pub fn to_local(&self, p: Point3) -> Point3 {
        (p - self.center()).rotate_z(-self.heading)
    }

    pub fn to_world(&self, local: Point3) -> Point3 {
        local.rotate_z(self.heading) + self.center()
    }

    /// Boundary-inclusive membership.
    pub fn contains(&self, p: Point3) -> bool {
        self.contains_with_margin(p, 0.0)
    }

    pub fn contains_with_margin(&self, p: Point3, margin: f64) -> bool {
        let q = self.to_local(p);
        q.x.abs() <= 0.5 * self.l + margin
            && q.y.abs() <= 0.5 * self.w + margin
            && q.z.abs() <= 0.5 * self.h + margin
    }

    pub fn corners(&self) -> [Point3; 8] {
        let half = self.dims() * 0.5;
        let local = Aabb {
            min: -half,
            max: half,
        };
        local.corners().map(|c| self.to_world(c))
    }

    pub fn world_aabb(&self) -> Aabb {
        Aabb::from_points(&self.corners())
    }

    /// Same box with every field except the heading multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            x: self.x * s,
            y: self.y * s,
            z: self.z * s,
            l: self.l * s,
            w: self.w * s,
            h: self.h * s,
            heading: self.heading,
        }
    }
}

/// Indices of `points` inside `b`, boundary inclusive.
pub fn points_in_box(points: &[Point3], b: &Box3D) -> Vec<usize> {
    let aabb = b.world_aabb();
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| aabb_prefilter(&aabb, **p) && b.contains(**p))
        .map(|(i, _)| i)
        .collect()
}

// Loose check that never rejects a point the exact test would accept.
fn aabb_prefilter(aabb: &Aabb, p: Point3) -> bool {
    let pad = 1e-9 * (1.0 + aabb.extent().norm());
    p.x >= aabb.min.x - pad
        && p.x <= aabb.max.x + pad
        && p.y >= aabb.min.y - pad
        && p.y <= aabb.max.y + pad
        && p.z >= aabb.min.z - pad
        && p.z <= aabb.max.z + pad
}

/// Maps a box detected in a frame scaled by `s` back to the unscaled frame.
/// Location and dimensions are divided by `s`; the heading is copied unchanged.
pub fn unscale_box(b: &Box3D, s: f64) -> Result<Box3D, GeomError> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(GeomError::NonPositiveScale(s));
    }
    Ok(Box3D {
        x: b.x / s,
        y: b.y / s,
        z: b.z / s,
        l: b.l / s,
        w: b.w / s,
        h: b.h / s,
        heading: b.heading,
    })
}
