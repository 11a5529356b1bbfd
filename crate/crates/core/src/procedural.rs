//! Procedural meshes used as fixtures, benchmarks and stand-ins for CAD assets.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::geom::{Aabb, Point3, Ray, TriangleMesh};

fn finish(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> TriangleMesh {
    TriangleMesh::new(vertices, triangles)
        .expect("procedural mesh indices are in range")
        .0
}

/// Closed axis-aligned box mesh, 12 triangles.
pub fn cuboid_mesh(center: Point3, dims: Point3) -> TriangleMesh {
    let h = dims * 0.5;
    let mut v = Vec::with_capacity(8);
    for i in 0..8u32 {
        let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
        let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
        let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
        v.push(center + Point3::new(sx * h.x, sy * h.y, sz * h.z));
    }
    let t = vec![
        [0, 2, 1],
        [1, 2, 3],
        [4, 5, 6],
        [5, 7, 6],
        [0, 1, 4],
        [1, 5, 4],
        [2, 6, 3],
        [3, 6, 7],
        [0, 4, 2],
        [2, 4, 6],
        [1, 3, 5],
        [3, 7, 5],
    ];
    finish(v, t)
}

/// Latitude/longitude sphere with `2 * slices * (stacks - 1)` triangles.
/// `slices = 250, stacks = 101` gives exactly 50,000.
pub fn uv_sphere(center: Point3, radius: f64, slices: u32, stacks: u32) -> TriangleMesh {
    assert!(
        slices >= 3 && stacks >= 2,
        "sphere needs slices >= 3 and stacks >= 2"
    );
    let mut v = vec![
        center + Point3::new(0.0, 0.0, radius),
        center - Point3::new(0.0, 0.0, radius),
    ];
    for i in 1..stacks {
        let polar = PI * i as f64 / stacks as f64;
        let (sp, cp) = polar.sin_cos();
        for j in 0..slices {
            let az = TAU * j as f64 / slices as f64;
            let (sa, ca) = az.sin_cos();
            v.push(center + Point3::new(sp * ca, sp * sa, cp) * radius);
        }
    }
    let ring = |i: u32, j: u32| 2 + (i - 1) * slices + (j % slices);
    let mut t = Vec::with_capacity((2 * slices * (stacks - 1)) as usize);
    for j in 0..slices {
        t.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            let (a, b) = (ring(i, j), ring(i, j + 1));
            let (c, d) = (ring(i + 1, j), ring(i + 1, j + 1));
            t.push([a, c, b]);
            t.push([b, c, d]);
        }
    }
    for j in 0..slices {
        t.push([1, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    finish(v, t)
}

/// The 50,000-triangle sphere used by the BVH benchmarks and acceptance tests.
pub fn benchmark_sphere() -> TriangleMesh {
    uv_sphere(Point3::ZERO, 1.0, 250, 101)
}

/// Low-poly car in canonical pose: length along +X, centered in XY, wheels at
/// z = 0. Its tight box is exactly `length x width x height`.
pub fn car_mesh(length: f64, width: f64, height: f64) -> TriangleMesh {
    let body_h = 0.55 * height;
    let body = cuboid_mesh(
        Point3::new(0.0, 0.0, 0.5 * body_h),
        Point3::new(length, width, body_h),
    );
    let cabin_len = 0.5 * length;
    let cabin_h = height - body_h;
    let cabin = cuboid_mesh(
        Point3::new(-0.05 * length, 0.0, body_h + 0.5 * cabin_h),
        Point3::new(cabin_len, 0.9 * width, cabin_h),
    );
    merge(&[body, cabin])
}

pub fn merge(meshes: &[TriangleMesh]) -> TriangleMesh {
    let mut v = Vec::new();
    let mut t = Vec::new();
    for m in meshes {
        let base = v.len() as u32;
        v.extend_from_slice(m.vertices());
        t.extend(m.indices().iter().map(|f| f.map(|i| i + base)));
    }
    finish(v, t)
}

/// `n` rays starting on a sphere around `aabb` (1.5x its half diagonal) and
/// aimed at uniform points inside it; against a closed mesh most of them hit.
pub fn probe_rays<R: Rng + ?Sized>(aabb: &Aabb, n: usize, rng: &mut R) -> Vec<Ray> {
    let c = aabb.center();
    let ext = aabb.extent();
    let radius = 0.75 * ext.norm().max(1e-9);
    let mut rays = Vec::with_capacity(n);
    while rays.len() < n {
        let d = Point3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let Some(dir) = d.normalized().filter(|_| d.norm() <= 1.0) else {
            continue;
        };
        let target = aabb.min
            + Point3::new(
                rng.gen::<f64>() * ext.x,
                rng.gen::<f64>() * ext.y,
                rng.gen::<f64>() * ext.z,
            );
        if let Ok(r) = Ray::through(c + dir * radius, target) {
            rays.push(r);
        }
    }
    rays
}
