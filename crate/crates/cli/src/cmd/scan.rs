use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;

use denoise_core::geom::{Bvh, Point3, TriangleMesh};
use denoise_core::io;
use denoise_core::sensor::generate_scan_rays;

use crate::config::RunConfig;
use crate::Exit;

/// Scan a model placed at a planar distance from the sensor and write the hits as PLY.
#[derive(Debug, Args)]
pub struct ScanArgs {
    /// OBJ or PLY mesh.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "kitti")]
    pub sensor: String,
    #[arg(long, env = "DENOISE_SENSORS")]
    pub sensor_library: Option<PathBuf>,
    /// Planar distance from the sensor to the model center, meters.
    #[arg(long)]
    pub distance: f64,
    /// Model heading, degrees.
    #[arg(long, default_value_t = 0.0)]
    pub heading: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub struct ScanStats {
    pub rays: usize,
    pub hits: usize,
    pub mean_depth: f64,
}

/// Centers the mesh in XY with its bottom on z = 0, rotates it by `heading`
/// and moves it to `(distance, 0)`.
pub fn place(mesh: &TriangleMesh, distance: f64, heading: f64) -> TriangleMesh {
    let bb = mesh.aabb();
    let c = bb.center();
    let lift = bb.min.z;
    mesh.map_vertices(|v| {
        let local = Point3::new(v.x - c.x, v.y - c.y, v.z - lift).rotate_z(heading);
        local + Point3::new(distance, 0.0, 0.0)
    })
}

pub fn run(args: &ScanArgs) -> Result<Exit> {
    if !(args.distance.is_finite() && args.distance > 0.0) {
        bail!(
            "--distance must be > 0 (got {}): the model would envelop the sensor",
            args.distance
        );
    }
    if !args.heading.is_finite() {
        bail!("--heading must be finite");
    }
    let cfg = RunConfig {
        sensor: Some(args.sensor.clone()),
        sensor_library: args.sensor_library.clone(),
        ..Default::default()
    };
    let spec = cfg.sensor()?;
    let (mesh, clean) =
        io::read_mesh(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    if clean.degenerate_dropped > 0 {
        log::info!("dropped {} degenerate triangles", clean.degenerate_dropped);
    }
    let placed = place(&mesh, args.distance, args.heading.to_radians());
    if placed.aabb().contains(spec.origin) {
        bail!(
            "the model envelops the sensor at {} m; increase --distance",
            args.distance
        );
    }
    let bvh = Bvh::build(&placed)?;

    let t0 = Instant::now();
    let pattern = generate_scan_rays(&spec, None);
    let hits: Vec<(Point3, f64, f64)> = pattern
        .rays
        .par_iter()
        .filter_map(|ray| {
            let h = bvh.cast_ray(&placed, ray)?;
            let tri = placed.triangle(h.triangle);
            let n = (tri.v1 - tri.v0).cross(tri.v2 - tri.v0).normalized()?;
            Some((h.point, h.t, n.dot(ray.direction).abs()))
        })
        .collect();
    let points: Vec<Point3> = hits.iter().map(|h| h.0).collect();
    let intensity: Vec<f64> = hits.iter().map(|h| h.2).collect();
    io::write_ply(&points, &intensity, &args.out)?;
    let stats = ScanStats {
        rays: pattern.len(),
        hits: hits.len(),
        mean_depth: if hits.is_empty() {
            0.0
        } else {
            hits.iter().map(|h| h.1).sum::<f64>() / hits.len() as f64
        },
    };
    println!(
        "scan {} at {:.2} m, heading {:.1} deg, sensor {}: {} hits of {} rays, mean depth {:.3} m ({:.1} ms)",
        args.model.display(),
        args.distance,
        args.heading,
        spec.name,
        stats.hits,
        stats.rays,
        stats.mean_depth,
        t0.elapsed().as_secs_f64() * 1e3
    );
    Ok(Exit::Ok)
}
