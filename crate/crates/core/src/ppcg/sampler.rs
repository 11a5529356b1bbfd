use crate::geom::{Point3, Ray};
use crate::models::{PosedGeometry, PosedModel};

/// Depth-ordered view of a point model as seen from one sensor origin.
///
/// A query returns the shallowest point whose direction from the origin is
/// within the angular gate of the ray, so the scan can stop at the first match.
#[derive(Debug, Clone)]
pub struct PointSampler {
    origin: Point3,
    // (depth, unit direction, original index), ascending depth then index.
    sorted: Vec<(f64, Point3, usize)>,
    points: Vec<Point3>,
}

impl PointSampler {
    pub fn new(points: &[Point3], origin: Point3) -> Self {
        let mut sorted: Vec<(f64, Point3, usize)> = points
            .iter()
            .enumerate()
            .filter_map(|(i, &p)| {
                let v = p - origin;
                let depth = v.norm();
                (depth > 0.0).then(|| (depth, v / depth, i))
            })
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        Self {
            origin,
            sorted,
            points: points.to_vec(),
        }
    }

    pub fn origin(&self) -> Point3 {
        self.origin
    }

    /// Index of the nearest point with angle to `ray.direction` strictly below `theta`.
    /// The ray must start at the sampler origin.
    pub fn sample_index(&self, ray: &Ray, theta: f64) -> Option<usize> {
        let cos_th = theta.cos();
        self.sorted
            .iter()
            .find(|(_, u, _)| {
                let c = u.dot(ray.direction);
                // Near the gate the cosine loses resolution; settle with atan2.
                if (c - cos_th).abs() > 1e-9 {
                    c > cos_th
                } else {
                    u.cross(ray.direction).norm().atan2(c) < theta
                }
            })
            .map(|(_, _, i)| *i)
    }

    pub fn sample(&self, ray: &Ray, theta: f64) -> Option<Point3> {
        self.sample_index(ray, theta).map(|i| self.points[i])
    }
}

/// Shallowest posed model point within `theta_th` of the ray; `None` for mesh
/// models or when no point qualifies.
pub fn sample_point_model(ray: &Ray, posed: &PosedModel, theta_th: f64) -> Option<Point3> {
    match &posed.geometry {
        PosedGeometry::Points(pts) => PointSampler::new(pts, ray.origin).sample(ray, theta_th),
        PosedGeometry::Mesh { .. } => None,
    }
}
