//! Acceptance checks, one line per criterion. Exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use common::*;
use denoise_core::frame::Frame;
use denoise_core::geom::{intersect_triangle, scale_frame, unscale_box, Box3D, Bvh, Point3, Ray};
use denoise_core::io;
use denoise_core::models::{LibraryFilter, ModelLibrary, PosedGeometry, PosedModel};
use denoise_core::ppcg::{
    cf_ppcg_box_with_factor, rc_ppcg_box, rc_ppcg_frame, sample_point_model, PpcgConfig, SetFlag,
};
use denoise_core::procedural;
use denoise_core::ptsn::{
    dali_iterate, generate_pseudo_labels, predicted_mean_size, ptsn_search, ConstantDetector,
    FixedDetector, IterateConfig, Metric, PtsnConfig, StageStatus, SyntheticDetector,
};
use denoise_core::sensor::{angular_threshold, default_sensor};
use denoise_core::toy::{generate_toy_scenes, toy_car_meshes, ToySceneConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ray_triangle_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs: Vec<_> = (0..100_000).map(|_| random_pair(&mut rng)).collect();
    let start = Instant::now();
    let (mut hits, mut max_dt) = (0usize, 0.0f64);
    for (i, (ray, tri)) in pairs.iter().enumerate() {
        let mt = intersect_triangle(ray, tri, 0).map(|h| h.t);
        let or = plane_oracle(ray, tri);
        match (mt, or) {
            (Some(a), Some(b)) => {
                hits += 1;
                max_dt = max_dt.max((a - b).abs());
            }
            (None, None) => {}
            _ => return Err(format!("pair {i}: MT {mt:?} vs oracle {or:?}")),
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(max_dt <= 1e-9, || format!("max |dt| {max_dt:e} > 1e-9"))?;
    ensure(elapsed < 5.0, || format!("took {elapsed:.2}s"))?;
    Ok(format!(
        "100000 pairs, {hits} hits, max |dt| {max_dt:.1e}, {elapsed:.2}s"
    ))
}

fn bvh_exact_and_fast() -> Outcome {
    let mesh = procedural::benchmark_sphere();
    ensure(mesh.triangle_count() == 50_000, || {
        format!("{} triangles", mesh.triangle_count())
    })?;
    let bvh = Bvh::build(&mesh).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rays: Vec<Ray> = (0..10_000)
        .map(|_| {
            let dir = random_point(&mut rng, 1.0);
            let origin = dir.normalized().unwrap_or(Point3::new(1.0, 0.0, 0.0)) * 3.0;
            Ray::through(origin, random_point(&mut rng, 1.2)).unwrap()
        })
        .collect();

    let t0 = Instant::now();
    let fast: Vec<_> = rays.iter().map(|r| bvh.cast_ray(&mesh, r)).collect();
    let t_bvh = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let slow: Vec<_> = rays.iter().map(|r| mesh.cast_ray_naive(r)).collect();
    let t_naive = t0.elapsed().as_secs_f64();

    let mut n_hits = 0;
    for (i, (a, b)) in fast.iter().zip(&slow).enumerate() {
        match (a, b) {
            (Some(a), Some(b)) => {
                n_hits += 1;
                let same = a.t == b.t && a.triangle == b.triangle;
                let tie = (a.t - b.t).abs() <= 1e-12;
                ensure(same || tie, || {
                    format!(
                        "ray {i}: bvh t={} tri={} vs naive t={} tri={}",
                        a.t, a.triangle, b.t, b.triangle
                    )
                })?;
            }
            (None, None) => {}
            _ => return Err(format!("ray {i}: hit/miss mismatch")),
        }
    }
    let tests: usize = rays
        .iter()
        .map(|r| bvh.cast_ray_with_stats(&mesh, r).1.triangle_tests)
        .sum();
    let frac = tests as f64 / (rays.len() as f64 * 50_000.0);
    let speedup = t_naive / t_bvh;
    ensure(speedup >= 10.0, || format!("speedup {speedup:.1}x < 10x"))?;
    ensure(frac <= 0.02, || {
        format!("BVH tested {:.3}% of triangles", 100.0 * frac)
    })?;
    Ok(format!(
        "10000 rays, {n_hits} hits identical, speedup {speedup:.0}x, {:.3}% triangle tests",
        100.0 * frac
    ))
}

fn mean_size_structure() -> Outcome {
    let m = [4.0, 2.0, 1.6];
    let det = ConstantDetector::new(m);
    let frames: Vec<Frame> = (0..4)
        .map(|i| {
            Frame::new(
                format!("{i}"),
                vec![Point3::new(5.0, i as f64, 0.5)],
                vec![0.2],
            )
            .unwrap()
        })
        .collect();
    let cfg = PtsnConfig::new(KITTI_MEAN);
    let mut last_volume = f64::INFINITY;
    for &s in &cfg.scale_grid {
        let p = predicted_mean_size(&det, &frames, s, &cfg).map_err(|e| e.to_string())?;
        for (got, mi) in p.dims().iter().zip(m) {
            ensure((got - mi / s).abs() <= 1e-12, || {
                format!("s={s}: {got} vs {}", mi / s)
            })?;
        }
        ensure(p.volume < last_volume, || {
            format!("volume not decreasing at s={s}")
        })?;
        last_volume = p.volume;
    }
    Ok(format!(
        "{} grid points, M/s within 1e-12, volume strictly decreasing",
        cfg.scale_grid.len()
    ))
}

fn ptsn_desk_scale() -> Outcome {
    let v_src: f64 = WAYMO_MEAN.iter().product();
    let v_est: f64 = KITTI_MEAN.iter().product();
    let s_vol = (v_src / v_est).cbrt();
    let s_l2 = WAYMO_MEAN.iter().map(|m| m * m).sum::<f64>()
        / WAYMO_MEAN
            .iter()
            .zip(KITTI_MEAN)
            .map(|(m, e)| m * e)
            .sum::<f64>();
    ensure((s_vol - 1.2025).abs() < 1e-4, || {
        format!("volume oracle {s_vol}")
    })?;
    ensure((s_l2 - 1.2026).abs() < 1e-4, || {
        format!("dims oracle {s_l2}")
    })?;

    let spec = default_sensor("kitti").ok_or("no kitti sensor")?;
    let scenes = generate_toy_scenes(
        &ToySceneConfig {
            frames: 20,
            seed: 4,
            ..Default::default()
        },
        &spec,
    );
    let frames: Vec<Frame> = scenes.into_iter().map(|s| s.frame).collect();
    let det = SyntheticDetector::new(WAYMO_MEAN, 0.0, 11).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut found = Vec::new();
    for (metric, oracle) in [(Metric::Volume, s_vol), (Metric::DimsL2, s_l2)] {
        let mut cfg = PtsnConfig::new(KITTI_MEAN);
        cfg.metric = metric;
        let r = ptsn_search(&det, &frames, &cfg).map_err(|e| e.to_string())?;
        let snapped = (oracle * 100.0).round() / 100.0;
        ensure((r.scale - 1.20).abs() <= 0.01 + 1e-9, || {
            format!("{metric:?}: s = {}", r.scale)
        })?;
        ensure((r.scale - snapped).abs() < 1e-9, || {
            format!("{metric:?}: s = {} vs snapped oracle {snapped}", r.scale)
        })?;
        found.push(format!("{metric:?} {:.2}", r.scale));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 10.0, || format!("search took {elapsed:.2}s"))?;
    Ok(format!(
        "{} (oracles {s_vol:.4} / {s_l2:.4}), 20 frames in {elapsed:.2}s",
        found.join(", ")
    ))
}

fn heading_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let frame = [Frame::new("f", vec![Point3::new(1.0, 1.0, 1.0)], vec![0.0]).unwrap()];
    for i in 0..1000 {
        let b = random_box(&mut rng);
        let s = rng.gen_range(0.5..2.0);
        let out = generate_pseudo_labels(&ListDetector(vec![(b, 0.9)]), &frame, s)
            .map_err(|e| e.to_string())?;
        let u = out[0].boxes[0];
        ensure(u.heading.to_bits() == b.heading.to_bits(), || {
            format!("case {i}: {} -> {}", b.heading, u.heading)
        })?;
        let direct = unscale_box(&b, s).map_err(|e| e.to_string())?;
        ensure(direct.heading.to_bits() == b.heading.to_bits(), || {
            format!("case {i}: unscale_box changed heading")
        })?;
    }
    Ok("1000 random boxes and scales, heading bit-identical".into())
}

fn sphere_library(slices: u32, stacks: u32) -> ModelLibrary {
    let filter = LibraryFilter {
        min_length: 0.0,
        ..Default::default()
    };
    ModelLibrary::from_meshes(
        vec![(
            "sphere".into(),
            procedural::uv_sphere(Point3::ZERO, 1.0, slices, stacks),
        )],
        &filter,
    )
    .unwrap()
}

fn rc_colinearity_and_cardinality() -> Outcome {
    let spec = default_sensor("kitti").ok_or("no kitti sensor")?;
    let (slices, stacks) = (128, 64);
    let center = Point3::new(20.0, 0.0, 1.0);
    let (posed, b) = posed_sphere(slices, stacks, center);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let raw = visible_sphere_points(&mut rng, center, 1.0, spec.origin, 200);

    let set = rc_ppcg_box(0, &raw, &posed, &spec);
    ensure(
        set.points.len() + set.dropped_ray_count == raw.len(),
        || "cardinality".into(),
    )?;
    // Outputs keep input order, so each one must sit on the ray of a later raw point.
    let mut i = 0;
    let mut max_res = 0.0f64;
    for p in &set.points {
        loop {
            ensure(i < raw.len(), || {
                format!("output {p:?} is on no source ray")
            })?;
            let ray = Ray::through(spec.origin, raw[i]).unwrap();
            i += 1;
            let r = ray.colinearity_residual(*p);
            if r <= 1e-9 {
                max_res = max_res.max(r);
                break;
            }
        }
    }
    let sag = uv_sphere_sagitta(slices, stacks);
    for p in &set.points {
        let d = (p.distance(center) - 1.0).abs();
        ensure(d <= sag + 1e-9, || {
            format!("radius residual {d:e} above facet bound {sag:e}")
        })?;
        ensure(b.contains_with_margin(*p, 1e-6), || {
            format!("{p:?} outside box")
        })?;
    }

    // Frame level: 200 sphere points plus background, and a gated dense box.
    let lib = sphere_library(slices, stacks);
    let background: Vec<Point3> = (0..50)
        .map(|k| Point3::new(-10.0, k as f64 * 0.3, 0.5))
        .collect();
    let mut pts = background.clone();
    pts.extend(&raw);
    let n = pts.len();
    let frame = Frame::new("rc", pts, vec![0.4; n]).unwrap();
    let (out, sets) = rc_ppcg_frame(&frame, &[b], &lib, &spec, &PpcgConfig::default());
    let s = &sets[0];
    ensure(s.original_count == 200, || {
        format!("interior {}", s.original_count)
    })?;
    ensure(s.points.len() + s.dropped_ray_count == 200, || {
        "frame cardinality".into()
    })?;
    ensure(out.len() == n - 200 + s.points.len(), || {
        format!("frame has {} points", out.len())
    })?;
    ensure(out.points[..50] == background[..], || {
        "points outside the box changed".into()
    })?;

    let dense: Vec<Point3> = (0..500)
        .map(|k| {
            let a = k as f64 * 0.01;
            center + Point3::new(-0.5 * a.cos(), 0.5 * a.sin(), 0.2)
        })
        .collect();
    let dense_frame = Frame::new("dense", dense, vec![0.4; 500]).unwrap();
    let (out, sets) = rc_ppcg_frame(&dense_frame, &[b], &lib, &spec, &PpcgConfig::default());
    ensure(out == dense_frame, || "gated frame changed".into())?;
    ensure(sets[0].has_flag(SetFlag::Gated), || {
        "gated flag missing".into()
    })?;

    Ok(format!(
        "{} of 200 rays hit, max residual {max_res:.1e}, dropped {}, 500-point box untouched",
        set.points.len(),
        set.dropped_ray_count
    ))
}

fn cf_identity_and_sparsity() -> Outcome {
    let spec = default_sensor("kitti").ok_or("no kitti sensor")?;
    let cfg = PpcgConfig::default();
    let lib = ModelLibrary::from_meshes(toy_car_meshes(), &LibraryFilter::default())
        .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for _ in 0..12 {
        let r = rng.gen_range(6.0..25.0);
        let az: f64 = rng.gen_range(-3.1..3.1);
        let l = rng.gen_range(3.5..5.0);
        let b = Box3D::new(
            r * az.cos(),
            r * az.sin(),
            0.8,
            l,
            1.8,
            1.6,
            rng.gen_range(-3.1..3.1),
        )
        .unwrap();
        let model = &lib.entries()[rng.gen_range(0..lib.len())];
        let s = rng.gen_range(1.0..4.0);
        let set = cf_ppcg_box_with_factor(0, &b, model, &spec, &cfg, s);
        for p in &set.points {
            let q = b.to_local(*p);
            ensure(
                q.x.abs() <= 0.5 * b.l + 1e-6 && q.y.abs() <= 0.5 * b.w + 1e-6,
                || format!("point {p:?} outside footprint (s = {s})"),
            )?;
            ensure(
                p.z >= b.bottom_z() - 1e-9 && p.z <= b.bottom_z() + b.h + 1e-9,
                || format!("z {} outside box", p.z),
            )?;
        }
        checked += set.points.len();
    }

    let sphere = sphere_model(128, 64);
    let b = sphere_box(&sphere, Point3::new(10.0, 0.0, 1.0));
    let counts: Vec<usize> = [1.0, 2.0, 4.0]
        .iter()
        .map(|&s| {
            cf_ppcg_box_with_factor(0, &b, &sphere, &spec, &cfg, s)
                .points
                .len()
        })
        .collect();
    ensure(counts.windows(2).all(|w| w[1] <= w[0]), || {
        format!("counts {counts:?} increase")
    })?;
    ensure(counts[1] < counts[0], || {
        format!(
            "20 m count {} not below 10 m count {}",
            counts[1], counts[0]
        )
    })?;
    Ok(format!(
        "{checked} points inside footprints; hits at 10/20/40 m: {counts:?}"
    ))
}

fn sampler_oracle_and_threshold() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let theta = angular_threshold(&default_sensor("kitti").ok_or("no kitti sensor")?);
    let deg = theta.to_degrees();
    ensure((deg - 0.39067).abs() < 5e-6, || {
        format!("KITTI threshold {deg} deg")
    })?;
    let mut found = 0;
    for case in 0..1000 {
        let origin = random_point(&mut rng, 2.0);
        let dir = random_point(&mut rng, 1.0)
            .normalized()
            .unwrap_or(Point3::new(1.0, 0.0, 0.0));
        let ray = Ray::new(origin, dir).unwrap();
        let th = rng.gen_range(0.002..0.05);
        let n = rng.gen_range(1..60);
        let cloud: Vec<Point3> = (0..n)
            .map(|_| {
                let depth = rng.gen_range(1.0..20.0);
                origin + dir * depth + random_point(&mut rng, 4.0 * th * depth)
            })
            .collect();
        let posed = PosedModel {
            model_id: "p".into(),
            scales: Point3::splat(1.0),
            bbox: Box3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap(),
            geometry: PosedGeometry::Points(cloud.clone()),
        };
        let got = sample_point_model(&ray, &posed, th);
        let want = sampler_oracle(origin, dir, &cloud, th).map(|i| cloud[i]);
        ensure(got == want, || format!("case {case}: {got:?} vs {want:?}"))?;
        found += got.is_some() as usize;
    }
    Ok(format!(
        "1000 cases ({found} with a match) equal the linear scan; KITTI theta {deg:.5} deg"
    ))
}

fn round_trips() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pts: Vec<Point3> = (0..300).map(|_| random_point(&mut rng, 50.0)).collect();
    let its: Vec<f64> = (0..300).map(|_| rng.gen_range(0.0..1.0)).collect();
    let frame = Frame::new("rt", pts, its).unwrap();

    let bin = dir.path().join("rt.bin");
    io::write_point_bin(&frame, &bin).map_err(|e| e.to_string())?;
    let back = io::read_point_bin(&bin).map_err(|e| e.to_string())?;
    let bin2 = dir.path().join("rt2.bin");
    io::write_point_bin(&back, &bin2).map_err(|e| e.to_string())?;
    ensure(
        std::fs::read(&bin).unwrap() == std::fs::read(&bin2).unwrap(),
        || "bin bytes differ".into(),
    )?;
    for (a, b) in frame.points.iter().zip(&back.points) {
        ensure(
            b.x == a.x as f32 as f64 && b.y == a.y as f32 as f64 && b.z == a.z as f32 as f64,
            || "bin values".into(),
        )?;
    }

    let ply = dir.path().join("rt.ply");
    io::write_ply(&frame.points, &frame.intensities, &ply).map_err(|e| e.to_string())?;
    let (pp, pi) = io::read_ply_points(&ply).map_err(|e| e.to_string())?;
    ensure(pp == back.points && pi == back.intensities, || {
        "ply values".into()
    })?;

    let labels: Vec<io::Label> = (0..200)
        .map(|_| io::Label::new(random_box(&mut rng), rng.gen_range(0.0..1.0)))
        .collect();
    let lp = dir.path().join("rt.txt");
    io::write_labels(&labels, &lp).map_err(|e| e.to_string())?;
    let lb = io::read_labels(&lp).map_err(|e| e.to_string())?;
    for (a, b) in labels.iter().zip(&lb) {
        let (x, y) = (&a.bbox, &b.bbox);
        let d = [
            x.x - y.x,
            x.y - y.y,
            x.z - y.z,
            x.l - y.l,
            x.w - y.w,
            x.h - y.h,
            a.confidence - b.confidence,
        ]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
        ensure(
            d <= 1e-6 && (x.heading - y.heading).abs() <= 1e-6 + 1e-12,
            || format!("label diff {d:e}"),
        )?;
    }

    for _ in 0..100 {
        let (a, b) = (rng.gen_range(0.3..3.0), rng.gen_range(0.3..3.0));
        let ab = scale_frame(&frame, a * b).unwrap();
        let a_b = scale_frame(&scale_frame(&frame, a).unwrap(), b).unwrap();
        let inv = scale_frame(&scale_frame(&frame, a).unwrap(), 1.0 / a).unwrap();
        for ((p, q), (r, o)) in ab
            .points
            .iter()
            .zip(&a_b.points)
            .zip(inv.points.iter().zip(&frame.points))
        {
            ensure(p.distance(*q) <= 1e-10 * 3f64.sqrt(), || {
                "group action".into()
            })?;
            ensure(
                (r.x - o.x).abs() <= 1e-12 * o.x.abs().max(1.0) * 4.0,
                || "scale inverse".into(),
            )?;
        }
        let bx = random_box(&mut rng);
        let u = unscale_box(&bx.scaled(a), a).unwrap();
        let d = (u.x - bx.x)
            .abs()
            .max((u.l - bx.l).abs())
            .max((u.z - bx.z).abs());
        ensure(
            d <= 1e-12 * 100.0 && u.heading.to_bits() == bx.heading.to_bits(),
            || format!("unscale diff {d:e}"),
        )?;
    }
    Ok("bin bytes identical, PLY exact at float32, labels within 1e-6, scale group action within 1e-10".into())
}

fn artifact_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(base: &Path, d: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else if matches!(p.extension().and_then(|x| x.to_str()), Some("bin" | "txt")) {
                out.insert(
                    p.strip_prefix(base).unwrap().display().to_string(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn iterate_determinism() -> Outcome {
    let spec = default_sensor("kitti").ok_or("no kitti sensor")?;
    let frames: Vec<Frame> = generate_toy_scenes(
        &ToySceneConfig {
            frames: 4,
            seed: 10,
            ..Default::default()
        },
        &spec,
    )
    .into_iter()
    .map(|s| s.frame)
    .collect();
    let lib = ModelLibrary::from_meshes(toy_car_meshes(), &LibraryFilter::default())
        .map_err(|e| e.to_string())?;
    let cfg = IterateConfig {
        iterations: 1,
        ptsn: PtsnConfig::new(KITTI_MEAN),
        ppcg: PpcgConfig {
            seed: 3,
            ..Default::default()
        },
        seed: 3,
        source_manifest: None,
        stop_after_stages: None,
    };
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let det = SyntheticDetector::new(WAYMO_MEAN, 0.1, 3).map_err(|e| e.to_string())?;
        let out = dali_iterate(
            &FixedDetector(Arc::new(det)),
            &frames,
            &lib,
            &spec,
            &cfg,
            dir.path(),
        )
        .map_err(|e| e.to_string())?;
        ensure(out.status == StageStatus::Complete, || {
            format!("status {:?}", out.status)
        })?;
        runs.push(artifact_bytes(dir.path()));
    }
    ensure(!runs[0].is_empty(), || "no artifacts".into())?;
    ensure(runs[0] == runs[1], || {
        "artifacts differ between runs".into()
    })?;
    Ok(format!(
        "{} frame/label artifacts byte-identical across two runs",
        runs[0].len()
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("ray-triangle oracle equivalence", ray_triangle_oracle),
        ("BVH exactness and speed", bvh_exact_and_fast),
        ("predicted mean size structure", mean_size_structure),
        ("PTSN desk-scale search", ptsn_desk_scale),
        ("heading invariance", heading_invariance),
        (
            "RC colinearity and cardinality",
            rc_colinearity_and_cardinality,
        ),
        ("CF identity and sparsity", cf_identity_and_sparsity),
        (
            "point-model sampling and threshold",
            sampler_oracle_and_threshold,
        ),
        ("round-trips", round_trips),
        ("iterate determinism", iterate_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
