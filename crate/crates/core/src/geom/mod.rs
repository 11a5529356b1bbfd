//! Core 3D types, rigid and scale transforms, ray/triangle intersection and a
//! BVH for nearest-hit queries.

mod boxes;
mod bvh;
mod kdtree;
mod mesh;
mod point;
mod ray;

pub use boxes::{points_in_box, unscale_box, Box3D};
pub use bvh::{build_bvh, Bvh, BvhNode, NodeKind, TraversalStats, MAX_LEAF_TRIANGLES};
pub use kdtree::KdTree;
pub use mesh::{Aabb, MeshCleanReport, TriangleMesh, MIN_TRIANGLE_AREA};
pub use point::{angle_distance, normalize_angle, Point3, Vec3};
pub use ray::{
    intersect_triangle, ray_triangle_intersect, Ray, RayHit, Triangle, DET_EPSILON, MIN_HIT_T,
};

use crate::frame::Frame;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error("mesh has no non-degenerate triangles")]
    EmptyMesh,
    #[error("scale must be positive and finite, got {0}")]
    NonPositiveScale(f64),
    #[error("ray direction has zero length")]
    ZeroDirection,
    #[error("non-finite value")]
    NonFinite,
    #[error("vertex {0} is not finite")]
    NonFiniteVertex(usize),
    #[error("face {face} references vertex {index}, mesh has {vertices}")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        vertices: usize,
    },
    #[error("box dimensions must be positive, got ({l}, {w}, {h})")]
    NonPositiveDims { l: f64, w: f64, h: f64 },
}

/// Multiplies every coordinate by `s`; ids and intensities are untouched.
pub fn scale_frame(frame: &Frame, s: f64) -> Result<Frame, GeomError> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(GeomError::NonPositiveScale(s));
    }
    Ok(Frame {
        id: frame.id.clone(),
        sensor_id: frame.sensor_id.clone(),
        points: frame.points.iter().map(|&p| p * s).collect(),
        intensities: frame.intensities.clone(),
    })
}
