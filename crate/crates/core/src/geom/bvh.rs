//! Bounding-volume hierarchy over a [`TriangleMesh`] for nearest-hit queries.
//!
//! Built top-down with a median split on the longest axis of the centroid
//! bounds. Ties in the split key are broken by triangle index, so the same mesh
//! always produces the same tree.

use serde::{Deserialize, Serialize};

use super::{intersect_triangle, Aabb, GeomError, Point3, Ray, RayHit, TriangleMesh};

pub const MAX_LEAF_TRIANGLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    /// Range into [`Bvh::triangle_order`].
    Leaf {
        first: u32,
        count: u32,
    },
    Inner {
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvhNode {
    pub aabb: Aabb,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    triangle_order: Vec<u32>,
}

/// Work counters for one traversal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraversalStats {
    pub nodes_visited: usize,
    pub triangle_tests: usize,
}

struct Prim {
    index: u32,
    centroid: Point3,
    aabb: Aabb,
}

pub fn build_bvh(mesh: &TriangleMesh) -> Result<Bvh, GeomError> {
    Bvh::build(mesh)
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Result<Self, GeomError> {
        let n = mesh.triangle_count();
        if n == 0 {
            return Err(GeomError::EmptyMesh);
        }
        let mut prims: Vec<Prim> = (0..n)
            .map(|i| {
                let t = mesh.triangle(i);
                Prim {
                    index: i as u32,
                    centroid: t.centroid(),
                    aabb: Aabb::from_points(&[t.v0, t.v1, t.v2]),
                }
            })
            .collect();
        let mut nodes = Vec::with_capacity(2 * n / MAX_LEAF_TRIANGLES + 1);
        build_node(&mut prims, 0, &mut nodes);
        let triangle_order = prims.iter().map(|p| p.index).collect();
        Ok(Self {
            nodes,
            triangle_order,
        })
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    pub fn triangle_order(&self) -> &[u32] {
        &self.triangle_order
    }

    pub fn root_aabb(&self) -> Aabb {
        self.nodes[0].aabb
    }

    /// Nearest forward hit; ties in t go to the lowest triangle index.
    pub fn cast_ray(&self, mesh: &TriangleMesh, ray: &Ray) -> Option<RayHit> {
        self.cast_ray_with_stats(mesh, ray).0
    }

    pub fn cast_ray_with_stats(
        &self,
        mesh: &TriangleMesh,
        ray: &Ray,
    ) -> (Option<RayHit>, TraversalStats) {
        let mut stats = TraversalStats::default();
        let inv_dir = Point3::new(
            1.0 / ray.direction.x,
            1.0 / ray.direction.y,
            1.0 / ray.direction.z,
        );
        let mut best: Option<RayHit> = None;
        let mut best_t = f64::INFINITY;
        if self.nodes[0]
            .aabb
            .ray_entry(ray, &inv_dir, best_t)
            .is_none()
        {
            return (None, stats);
        }
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            stats.nodes_visited += 1;
            match node.kind {
                NodeKind::Leaf { first, count } => {
                    let range = first as usize..(first + count) as usize;
                    for &tri in &self.triangle_order[range] {
                        stats.triangle_tests += 1;
                        let tri = tri as usize;
                        if let Some(hit) = intersect_triangle(ray, &mesh.triangle(tri), tri) {
                            if best.as_ref().is_none_or(|b| hit.is_closer_than(b)) {
                                best_t = hit.t;
                                best = Some(hit);
                            }
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let l = self.nodes[left as usize]
                        .aabb
                        .ray_entry(ray, &inv_dir, best_t);
                    let r = self.nodes[right as usize]
                        .aabb
                        .ray_entry(ray, &inv_dir, best_t);
                    match (l, r) {
                        (Some(tl), Some(tr)) => {
                            // Push the farther child first so the nearer one is popped next.
                            if tl <= tr {
                                stack.push(right);
                                stack.push(left);
                            } else {
                                stack.push(left);
                                stack.push(right);
                            }
                        }
                        (Some(_), None) => stack.push(left),
                        (None, Some(_)) => stack.push(right),
                        (None, None) => {}
                    }
                }
            }
        }
        (best, stats)
    }

    /// Checks the structural invariants: every triangle in exactly one leaf,
    /// leaf size bound, parent boxes enclosing children and triangle bounds.
    pub fn validate(&self, mesh: &TriangleMesh) -> Result<(), String> {
        let n = mesh.triangle_count();
        let mut seen = vec![0u32; n];
        for (i, node) in self.nodes.iter().enumerate() {
            match node.kind {
                NodeKind::Leaf { first, count } => {
                    if count as usize > MAX_LEAF_TRIANGLES || count == 0 {
                        return Err(format!("leaf {i} holds {count} triangles"));
                    }
                    for &t in &self.triangle_order[first as usize..(first + count) as usize] {
                        seen[t as usize] += 1;
                        let tri = mesh.triangle(t as usize);
                        let tb = Aabb::from_points(&[tri.v0, tri.v1, tri.v2]);
                        if !node.aabb.encloses(&tb) {
                            return Err(format!("leaf {i} does not enclose triangle {t}"));
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    for c in [left, right] {
                        if c as usize <= i || c as usize >= self.nodes.len() {
                            return Err(format!("node {i} has invalid child {c}"));
                        }
                        if !node.aabb.encloses(&self.nodes[c as usize].aabb) {
                            return Err(format!("node {i} does not enclose child {c}"));
                        }
                    }
                }
            }
        }
        if let Some(t) = seen.iter().position(|&c| c != 1) {
            return Err(format!("triangle {t} appears in {} leaves", seen[t]));
        }
        Ok(())
    }
}

fn build_node(prims: &mut [Prim], offset: usize, nodes: &mut Vec<BvhNode>) -> u32 {
    let aabb = prims.iter().fold(Aabb::EMPTY, |b, p| b.union(p.aabb));
    let id = nodes.len() as u32;
    if prims.len() <= MAX_LEAF_TRIANGLES {
        nodes.push(BvhNode {
            aabb,
            kind: NodeKind::Leaf {
                first: offset as u32,
                count: prims.len() as u32,
            },
        });
        return id;
    }
    let centroid_bounds = prims.iter().fold(Aabb::EMPTY, |b, p| b.grow(p.centroid));
    let axis = centroid_bounds.longest_axis();
    let mid = prims.len() / 2;
    prims.select_nth_unstable_by(mid, |a, b| {
        a.centroid[axis]
            .total_cmp(&b.centroid[axis])
            .then(a.index.cmp(&b.index))
    });
    // Placeholder, patched once both children exist.
    nodes.push(BvhNode {
        aabb,
        kind: NodeKind::Leaf { first: 0, count: 0 },
    });
    let (lo, hi) = prims.split_at_mut(mid);
    let left = build_node(lo, offset, nodes);
    let right = build_node(hi, offset + mid, nodes);
    nodes[id as usize].kind = NodeKind::Inner { left, right };
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procedural;

    #[test]
    fn single_triangle_is_one_leaf() {
        let (mesh, _) = TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let bvh = Bvh::build(&mesh).unwrap();
        assert_eq!(bvh.nodes().len(), 1);
        assert!(matches!(
            bvh.nodes()[0].kind,
            NodeKind::Leaf { count: 1, .. }
        ));
    }

    #[test]
    fn empty_mesh_rejected() {
        let (mesh, _) = TriangleMesh::new(vec![Point3::ZERO; 3], vec![[0, 1, 2]]).unwrap();
        assert_eq!(Bvh::build(&mesh).unwrap_err(), GeomError::EmptyMesh);
    }

    #[test]
    fn cube_hit_on_near_face() {
        let mesh = procedural::cuboid_mesh(Point3::ZERO, Point3::splat(1.0));
        let bvh = Bvh::build(&mesh).unwrap();
        bvh.validate(&mesh).unwrap();
        let ray = Ray::new(Point3::new(-3.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)).unwrap();
        let hit = bvh.cast_ray(&mesh, &ray).unwrap();
        assert!((hit.t - 2.5).abs() < 1e-12);
        assert!((hit.point.x + 0.5).abs() < 1e-12);
    }

    #[test]
    fn aabb_miss_costs_no_triangle_tests() {
        let mesh = procedural::uv_sphere(Point3::ZERO, 1.0, 24, 12);
        let bvh = Bvh::build(&mesh).unwrap();
        // Passes just above the top of the bounding box.
        let ray = Ray::new(
            Point3::new(-5.0, 0.0, 1.0 + 1e-3),
            Point3::new(1.0, 0.0, 0.0),
        )
        .unwrap();
        let (hit, stats) = bvh.cast_ray_with_stats(&mesh, &ray);
        assert!(hit.is_none());
        assert_eq!(stats.triangle_tests, 0);
        assert_eq!(stats.nodes_visited, 0);
    }

    #[test]
    fn build_is_deterministic() {
        let mesh = procedural::uv_sphere(Point3::ZERO, 2.0, 40, 20);
        assert_eq!(Bvh::build(&mesh).unwrap(), Bvh::build(&mesh).unwrap());
    }
}
