use serde::{Deserialize, Serialize};

use super::{GeomError, Point3, Ray, Triangle};

/// Triangles with area at or below this (m^2) are dropped when a mesh is built.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
        max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
    };

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Self {
        points.into_iter().fold(Self::EMPTY, |b, p| b.grow(*p))
    }

    pub fn grow(self, p: Point3) -> Self {
        Self {
            min: self.min.min(p),
            max: self.max.max(p),
        }
    }

    pub fn union(self, o: Aabb) -> Self {
        Self {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z
    }

    pub fn extent(&self) -> Point3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point3 {
        (self.min + self.max) * 0.5
    }

    pub fn longest_axis(&self) -> usize {
        let e = self.extent();
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }

    pub fn contains(&self, p: Point3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    pub fn encloses(&self, o: &Aabb) -> bool {
        self.contains(o.min) && self.contains(o.max)
    }

    pub fn corners(&self) -> [Point3; 8] {
        let (a, b) = (self.min, self.max);
        [
            Point3::new(a.x, a.y, a.z),
            Point3::new(b.x, a.y, a.z),
            Point3::new(a.x, b.y, a.z),
            Point3::new(b.x, b.y, a.z),
            Point3::new(a.x, a.y, b.z),
            Point3::new(b.x, a.y, b.z),
            Point3::new(a.x, b.y, b.z),
            Point3::new(b.x, b.y, b.z),
        ]
    }

    /// Slab test. Returns the parametric entry distance when the ray overlaps the
    /// box within `[0, t_max]`. The interval is widened by a relative 1e-9 so that
    /// boxes touching a hit exactly on a face are never culled.
    pub fn ray_entry(&self, ray: &Ray, inv_dir: &Point3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for axis in 0..3 {
            let o = ray.origin[axis];
            let inv = inv_dir[axis];
            let (lo, hi) = (self.min[axis], self.max[axis]);
            if inv.is_infinite() {
                // Ray parallel to this slab.
                if o < lo || o > hi {
                    return None;
                }
                continue;
            }
            let mut near = (lo - o) * inv;
            let mut far = (hi - o) * inv;
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            let pad = 1e-9 * (1.0 + near.abs().max(far.abs()));
            t0 = t0.max(near - pad);
            t1 = t1.min(far + pad);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

/// Outcome of building a mesh from raw vertex/index data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshCleanReport {
    pub input_triangles: usize,
    pub degenerate_dropped: usize,
}

/// Indexed triangle mesh with degenerate faces removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[u32; 3]>,
    aabb: Aabb,
}

impl TriangleMesh {
    /// Validates indices and drops triangles with area <= [`MIN_TRIANGLE_AREA`].
    pub fn new(
        vertices: Vec<Point3>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<(Self, MeshCleanReport), GeomError> {
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeomError::NonFiniteVertex(i));
        }
        let n = vertices.len();
        let input_triangles = triangles.len();
        let mut kept = Vec::with_capacity(input_triangles);
        for (face, idx) in triangles.into_iter().enumerate() {
            if let Some(&bad) = idx.iter().find(|&&i| i as usize >= n) {
                return Err(GeomError::IndexOutOfRange {
                    face,
                    index: bad as usize,
                    vertices: n,
                });
            }
            let tri = Triangle::new(
                vertices[idx[0] as usize],
                vertices[idx[1] as usize],
                vertices[idx[2] as usize],
            );
            if tri.area() > MIN_TRIANGLE_AREA {
                kept.push(idx);
            }
        }
        let report = MeshCleanReport {
            input_triangles,
            degenerate_dropped: input_triangles - kept.len(),
        };
        let aabb = Aabb::from_points(&vertices);
        Ok((
            Self {
                vertices,
                triangles: kept,
                aabb,
            },
            report,
        ))
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn indices(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn aabb(&self) -> Aabb {
        self.aabb
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle(&self, i: usize) -> Triangle {
        let [a, b, c] = self.triangles[i];
        Triangle::new(
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        )
    }

    pub fn triangles(&self) -> impl Iterator<Item = Triangle> + '_ {
        (0..self.triangles.len()).map(move |i| self.triangle(i))
    }

    /// Applies `f` to every vertex; topology is kept.
    pub fn map_vertices(&self, f: impl Fn(Point3) -> Point3) -> Self {
        let vertices: Vec<Point3> = self.vertices.iter().map(|&v| f(v)).collect();
        let aabb = Aabb::from_points(&vertices);
        Self {
            vertices,
            triangles: self.triangles.clone(),
            aabb,
        }
    }

    /// Brute-force nearest hit over all triangles.
    pub fn cast_ray_naive(&self, ray: &Ray) -> Option<super::RayHit> {
        let mut best: Option<super::RayHit> = None;
        for i in 0..self.triangles.len() {
            if let Some(hit) = super::intersect_triangle(ray, &self.triangle(i), i) {
                if best.as_ref().is_none_or(|b| hit.is_closer_than(b)) {
                    best = Some(hit);
                }
            }
        }
        best
    }
}
