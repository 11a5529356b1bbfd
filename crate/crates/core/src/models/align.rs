use super::library::{ShapeModel, MIN_CANONICAL_DIM};
use super::ModelError;
use crate::geom::{Box3D, Bvh, Point3, TriangleMesh};

#[derive(Debug, Clone)]
pub enum PosedGeometry {
    /// World-space mesh and its hierarchy.
    Mesh {
        mesh: TriangleMesh,
        bvh: Bvh,
    },
    Points(Vec<Point3>),
}

/// A library model scaled per axis and placed in a target box.
#[derive(Debug, Clone)]
pub struct PosedModel {
    pub model_id: String,
    /// (s_l, s_w, s_h)
    pub scales: Point3,
    pub bbox: Box3D,
    pub geometry: PosedGeometry,
}

impl PosedModel {
    /// Canonical model coordinates to world coordinates.
    pub fn to_world(&self, c: Point3) -> Point3 {
        pose_point(&self.bbox, self.scales, c)
    }

    /// Inverse of [`PosedModel::to_world`].
    pub fn to_canonical(&self, p: Point3) -> Point3 {
        let q = self.bbox.to_local(p);
        Point3::new(
            q.x / self.scales.x,
            q.y / self.scales.y,
            (q.z + 0.5 * self.bbox.h) / self.scales.z,
        )
    }

    pub fn world_points(&self) -> &[Point3] {
        match &self.geometry {
            PosedGeometry::Mesh { mesh, .. } => mesh.vertices(),
            PosedGeometry::Points(p) => p,
        }
    }
}

fn pose_point(b: &Box3D, s: Point3, c: Point3) -> Point3 {
    b.to_world(Point3::new(c.x * s.x, c.y * s.y, c.z * s.z - 0.5 * b.h))
}

/// Scales the model per axis to the box dims, rotates by the box heading and
/// moves it so the canonical bottom-center lands on the box bottom-center.
pub fn align_model_to_box(model: &ShapeModel, b: &Box3D) -> Result<PosedModel, ModelError> {
    let d = model.canonical_dims();
    if d.x <= MIN_CANONICAL_DIM || d.y <= MIN_CANONICAL_DIM || d.z <= MIN_CANONICAL_DIM {
        return Err(ModelError::DegenerateModel(model.id().to_string()));
    }
    let scales = Point3::new(b.l / d.x, b.w / d.y, b.h / d.z);
    let geometry = match model {
        ShapeModel::Mesh(m) => {
            let mesh = m.mesh.map_vertices(|v| pose_point(b, scales, v));
            let bvh = Bvh::build(&mesh).map_err(|source| ModelError::Geom {
                id: m.id.clone(),
                source,
            })?;
            PosedGeometry::Mesh { mesh, bvh }
        }
        ShapeModel::Points(m) => {
            PosedGeometry::Points(m.points.iter().map(|&p| pose_point(b, scales, p)).collect())
        }
    };
    Ok(PosedModel {
        model_id: model.id().to_string(),
        scales,
        bbox: *b,
        geometry,
    })
}
