mod common;

use denoise_core::frame::Frame;
use denoise_core::geom::{points_in_box, Box3D, Point3};
use denoise_core::models::{LibraryFilter, ModelLibrary, PointModel};
use denoise_core::ppcg::{
    cf_ppcg_box_with_factor, cf_ppcg_frame, rc_ppcg_frame, relocation_factor_for, PpcgConfig,
    PseudoSource, SetFlag,
};
use denoise_core::sensor::{default_sensor, SensorSpec};
use denoise_core::toy::{scan_scene, toy_car_meshes};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn kitti() -> SensorSpec {
    default_sensor("kitti").unwrap()
}

fn cad() -> ModelLibrary {
    ModelLibrary::from_meshes(toy_car_meshes(), &LibraryFilter::default()).unwrap()
}

/// A scanned car at distance `r`, thinned to at most `keep` points inside its box.
fn scanned_car(b: &Box3D, keep: usize) -> Frame {
    let spec = kitti();
    let full = scan_scene("car", &[*b], &spec, 0.0);
    let idx = points_in_box(&full.points, b);
    let step = (idx.len() / keep.max(1)).max(1);
    let mut f = Frame::empty("car");
    for &i in idx.iter().step_by(step).take(keep) {
        f.push(full.points[i], full.intensities[i]);
    }
    f
}

#[test]
fn replacement_arithmetic() {
    let b = Box3D::new(25.0, 4.0, 0.75, 4.2, 1.8, 1.5, 0.4).unwrap();
    let mut frame = scanned_car(&b, 50);
    assert_eq!(frame.len(), 50);
    let outside: Vec<Point3> = (0..30).map(|i| Point3::new(-5.0, i as f64, 0.3)).collect();
    for &p in &outside {
        frame.push(p, 0.05);
    }
    let (out, sets) = rc_ppcg_frame(&frame, &[b], &cad(), &kitti(), &PpcgConfig::default());
    let s = &sets[0];
    assert_eq!(s.source, PseudoSource::Rc);
    assert!(s.points.len() <= 50);
    assert_eq!(s.points.len() + s.dropped_ray_count, 50);
    assert_eq!(out.len(), frame.len() - 50 + s.points.len());
    assert_eq!(&out.points[..30], &outside[..]);
    for p in &s.points {
        assert!(b.contains_with_margin(*p, 1e-6));
    }
}

#[test]
fn disjoint_boxes_are_independent() {
    let a = Box3D::new(15.0, -3.0, 0.75, 4.0, 1.7, 1.5, 0.1).unwrap();
    let c = Box3D::new(-12.0, 8.0, 0.8, 4.6, 1.9, 1.6, -1.2).unwrap();
    let fa = scanned_car(&a, 120);
    let fc = scanned_car(&c, 80);
    let mut both = fa.clone();
    for (p, i) in fc.points.iter().zip(&fc.intensities) {
        both.push(*p, *i);
    }
    let (lib, spec, cfg) = (cad(), kitti(), PpcgConfig::default());
    let (out, sets) = rc_ppcg_frame(&both, &[a, c], &lib, &spec, &cfg);
    let (_, sa) = rc_ppcg_frame(&fa, &[a], &lib, &spec, &cfg);
    let (_, sc) = rc_ppcg_frame(&fc, &[c], &lib, &spec, &cfg);
    let find = |id| sets.iter().find(|s| s.box_id == id).unwrap();
    assert_eq!(find(0).points, sa[0].points);
    assert_eq!(find(1).points, sc[0].points);
    assert_eq!(out.len(), sa[0].points.len() + sc[0].points.len());
}

#[test]
fn overlapping_boxes_consume_points_once() {
    let big = Box3D::new(15.0, 0.0, 0.75, 4.4, 1.8, 1.5, 0.0).unwrap();
    let small = Box3D::new(16.5, 0.0, 0.75, 2.0, 2.0, 1.5, 0.0).unwrap();
    let frame = scanned_car(&big, 200);
    let (lib, spec, cfg) = (cad(), kitti(), PpcgConfig::default());
    let (out, sets) = rc_ppcg_frame(&frame, &[small, big], &lib, &spec, &cfg);
    assert_eq!(sets[0].box_id, 1, "larger interior goes first");
    let total: usize = sets.iter().map(|s| s.original_count).sum();
    assert_eq!(total, points_in_box(&frame.points, &big).len());
    let produced: usize = sets.iter().map(|s| s.points.len()).sum();
    assert_eq!(out.len(), frame.len() - total + produced);
}

#[test]
fn empty_result_restores_originals() {
    // Point model whose points sit in one corner; rays through the far side find nothing.
    let corner: Vec<Point3> = (0..400)
        .map(|i| Point3::new(1.9, -0.9, 0.1 + 0.003 * i as f64))
        .collect();
    let pm = PointModel::new("corner", corner, Point3::new(4.0, 2.0, 1.5), 0.0, 10.0);
    let lib = ModelLibrary::from_point_models(vec![pm], &LibraryFilter::default()).unwrap();
    let b = Box3D::new(20.0, 0.0, 0.75, 4.0, 2.0, 1.5, 0.0).unwrap();
    let pts: Vec<Point3> = (0..20)
        .map(|i| Point3::new(19.0, 0.5 + 0.01 * i as f64, 0.5))
        .collect();
    let frame = Frame::new("f", pts, vec![0.2; 20]).unwrap();
    let (out, sets) = rc_ppcg_frame(&frame, &[b], &lib, &kitti(), &PpcgConfig::default());
    assert!(sets[0].has_flag(SetFlag::EmptyFallback));
    assert_eq!(sets[0].dropped_ray_count, 20);
    assert_eq!(out, frame);
}

#[test]
fn relocation_factor_rules() {
    let near = Box3D::new(6.0, 8.0, 0.8, 4.0, 1.8, 1.5, 0.0).unwrap();
    assert!((relocation_factor_for(&near, 40.0) - 4.0).abs() < 1e-12);
    let far = Box3D::new(70.0, 0.0, 0.8, 4.0, 1.8, 1.5, 0.0).unwrap();
    assert_eq!(relocation_factor_for(&far, 40.0), 1.0);
    let at_origin = Box3D::new(0.0, 0.0, 0.8, 4.0, 1.8, 1.5, 0.0).unwrap();
    assert_eq!(relocation_factor_for(&at_origin, 40.0), 1.0);
}

#[test]
fn sparse_scan_retries_then_flags() {
    let lib = cad();
    let b = Box3D::new(12.0, 0.0, 0.75, 4.0, 1.7, 1.5, 0.0).unwrap();
    let cfg = PpcgConfig {
        cf_min_points: 1_000_000,
        ..Default::default()
    };
    let set = cf_ppcg_box_with_factor(0, &b, &lib.entries()[0], &kitti(), &cfg, 4.0);
    assert!(set.has_flag(SetFlag::Retried));
    assert!(set.has_flag(SetFlag::TooSparse));
    assert!(set.points.is_empty());
    assert!((set.relocation_factor - 2.5).abs() < 1e-12);
}

#[test]
fn cf_frame_keeps_originals_and_draws_in_range() {
    let lib = cad();
    let spec = kitti();
    let boxes = [
        Box3D::new(10.0, 2.0, 0.75, 4.0, 1.7, 1.5, 0.3).unwrap(),
        Box3D::new(-8.0, -9.0, 0.8, 4.5, 1.9, 1.6, 2.0).unwrap(),
    ];
    let frame = scan_scene("s", &boxes, &spec, 15.0);
    let cfg = PpcgConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let (out, sets) = cf_ppcg_frame(&frame, &boxes, &lib, &spec, &cfg, &mut rng);
    assert_eq!(out, frame);
    assert_eq!(sets.len(), 2);
    for (s, b) in sets.iter().zip(&boxes) {
        assert_eq!(s.source, PseudoSource::Cf);
        let d = b.x.hypot(b.y) * s.relocation_factor;
        assert!((30.0..60.0).contains(&d), "relocated to {d} m");
        assert!(!s.points.is_empty());
        assert_eq!(s.intensity, 0.5);
    }
}

#[test]
fn point_library_drives_both_generators() {
    let spec = kitti();
    let b = Box3D::new(9.0, 1.0, 0.75, 4.0, 1.7, 1.5, 0.2).unwrap();
    let full = scan_scene("src", &[b], &spec, 0.0);
    let models = denoise_core::models::extract_point_models(
        &full,
        &[denoise_core::io::Label::new(b, 1.0)],
        spec.origin,
        "inst",
    );
    assert!(models[0].points.len() >= 300);
    let lib = ModelLibrary::from_point_models(models, &LibraryFilter::default()).unwrap();

    let target = Box3D::new(18.0, 2.0, 0.75, 4.0, 1.7, 1.5, 0.2).unwrap();
    let sparse = scanned_car(&target, 60);
    let (_, rc) = rc_ppcg_frame(&sparse, &[target], &lib, &spec, &PpcgConfig::default());
    assert_eq!(rc[0].points.len() + rc[0].dropped_ray_count, 60);
    assert!(!rc[0].points.is_empty());

    let mut rng = ChaCha8Rng::seed_from_u64(301);
    let (_, cf) = cf_ppcg_frame(
        &sparse,
        &[target],
        &lib,
        &spec,
        &PpcgConfig::default(),
        &mut rng,
    );
    for p in &cf[0].points {
        let q = target.to_local(*p);
        assert!(q.x.abs() <= 0.5 * target.l + 1e-6 && q.y.abs() <= 0.5 * target.w + 1e-6);
    }
}
