use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use denoise_core::geom::{Bvh, RayHit};
use denoise_core::io;
use denoise_core::procedural::{benchmark_sphere, probe_rays};

use crate::config::DEFAULT_SEED;
use crate::manifest::write_atomic;
use crate::Exit;

/// Time BVH ray casting against a naive scan over all triangles.
#[derive(Debug, Args)]
pub struct BenchArgs {
    /// OBJ or PLY mesh; defaults to the 50k-triangle benchmark sphere.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub rays: usize,
    /// Rays given to the naive scan (a prefix of the BVH rays); per-ray times are compared.
    #[arg(long, default_value_t = 2_000)]
    pub naive_rays: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Also write the table as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct BenchRow {
    pub method: &'static str,
    pub rays: usize,
    pub hits: usize,
    pub total_ms: f64,
    pub us_per_ray: f64,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub mesh: String,
    pub triangles: usize,
    pub build_ms: f64,
    pub rows: Vec<BenchRow>,
    pub speedup: f64,
    pub agreeing_rays: usize,
}

fn same(a: &Option<RayHit>, b: &Option<RayHit>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => a.t == b.t || (a.t - b.t).abs() <= 1e-12,
        (None, None) => true,
        _ => false,
    }
}

fn row(method: &'static str, hits: &[Option<RayHit>], secs: f64) -> BenchRow {
    BenchRow {
        method,
        rays: hits.len(),
        hits: hits.iter().filter(|h| h.is_some()).count(),
        total_ms: secs * 1e3,
        us_per_ray: secs * 1e6 / hits.len().max(1) as f64,
    }
}

pub fn run(args: &BenchArgs) -> Result<Exit> {
    if args.rays == 0 {
        bail!("--rays must be positive");
    }
    let (mesh, name) = match &args.mesh {
        Some(p) => (
            io::read_mesh(p)
                .with_context(|| format!("loading {}", p.display()))?
                .0,
            p.display().to_string(),
        ),
        None => (benchmark_sphere(), "benchmark sphere".to_string()),
    };
    let t = Instant::now();
    let bvh = Bvh::build(&mesh)?;
    let build_ms = t.elapsed().as_secs_f64() * 1e3;

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let rays = probe_rays(&mesh.aabb(), args.rays, &mut rng);
    let t = Instant::now();
    let fast: Vec<_> = rays.iter().map(|r| bvh.cast_ray(&mesh, r)).collect();
    let bvh_s = t.elapsed().as_secs_f64();
    let n_naive = args.naive_rays.clamp(1, rays.len());
    let t = Instant::now();
    let slow: Vec<_> = rays[..n_naive]
        .iter()
        .map(|r| mesh.cast_ray_naive(r))
        .collect();
    let naive_s = t.elapsed().as_secs_f64();

    let agreeing = fast.iter().zip(&slow).filter(|(a, b)| same(a, b)).count();
    let rows = vec![row("naive", &slow, naive_s), row("bvh", &fast, bvh_s)];
    let report = BenchReport {
        mesh: name,
        triangles: mesh.triangle_count(),
        build_ms,
        speedup: rows[0].us_per_ray / rows[1].us_per_ray.max(1e-12),
        rows,
        agreeing_rays: agreeing,
    };

    println!(
        "mesh: {}, {} triangles, BVH build {:.1} ms",
        report.mesh, report.triangles, report.build_ms
    );
    println!(
        "{:<8} {:>8} {:>8} {:>12} {:>12}",
        "method", "rays", "hits", "total_ms", "us_per_ray"
    );
    for r in &report.rows {
        println!(
            "{:<8} {:>8} {:>8} {:>12.2} {:>12.3}",
            r.method, r.rays, r.hits, r.total_ms, r.us_per_ray
        );
    }
    println!(
        "speedup {:.1}x per ray; nearest hits agree on {agreeing} of {n_naive} rays",
        report.speedup
    );
    if let Some(p) = &args.json {
        write_atomic(p, &serde_json::to_vec_pretty(&report)?)?;
    }
    if agreeing != n_naive {
        bail!("BVH and naive scan disagree on {} rays", n_naive - agreeing);
    }
    Ok(Exit::Ok)
}
