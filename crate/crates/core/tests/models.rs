mod common;

use common::*;
use denoise_core::geom::{Box3D, KdTree, Point3};
use denoise_core::io::{self, Label};
use denoise_core::models::{
    align_model_to_box, build_library, chamfer_distance, extract_point_models, save_mesh_library,
    save_point_library, select_best_point_model, select_by_dims, LibraryFilter, LibraryKind,
    LibraryManifest, ModelLibrary, PointMatchConfig, PointModel, ShapeModel,
};
use denoise_core::procedural;
use denoise_core::sensor::default_sensor;
use denoise_core::toy::{generate_toy_scenes, ToySceneConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_chamfer(a: &[Point3], b: &[Point3]) -> f64 {
    let dir = |x: &[Point3], y: &[Point3]| {
        x.iter()
            .map(|p| {
                y.iter()
                    .map(|q| p.distance_squared(*q))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            / x.len() as f64
    };
    dir(a, b) + dir(b, a)
}

#[test]
fn chamfer_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for _ in 0..30 {
        let a: Vec<Point3> = (0..rng.gen_range(1..200))
            .map(|_| random_point(&mut rng, 1.0))
            .collect();
        let b: Vec<Point3> = (0..rng.gen_range(1..200))
            .map(|_| random_point(&mut rng, 1.0))
            .collect();
        let got = chamfer_distance(&KdTree::new(a.clone()), &KdTree::new(b.clone()));
        let want = brute_chamfer(&a, &b);
        assert!(
            (got - want).abs() <= 1e-12 * want.max(1.0),
            "{got} vs {want}"
        );
    }
}

#[test]
fn dims_selection_matches_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    let meshes: Vec<_> = (0..80)
        .map(|i| {
            let l = rng.gen_range(2.2..7.5);
            (
                format!("m{i:03}"),
                procedural::car_mesh(l, rng.gen_range(1.4..2.6), rng.gen_range(1.2..3.0)),
            )
        })
        .collect();
    let lib = ModelLibrary::from_meshes(meshes, &LibraryFilter::default()).unwrap();
    for _ in 0..500 {
        let b = Box3D::new(
            0.0,
            0.0,
            0.0,
            rng.gen_range(0.5..12.0),
            rng.gen_range(0.5..4.0),
            rng.gen_range(0.5..4.0),
            0.0,
        )
        .unwrap();
        let target = b.dims();
        let want = (0..lib.len())
            .min_by(|&i, &j| {
                let (di, dj) = (
                    lib.entries()[i].canonical_dims().distance_squared(target),
                    lib.entries()[j].canonical_dims().distance_squared(target),
                );
                di.total_cmp(&dj).then(i.cmp(&j))
            })
            .unwrap();
        assert_eq!(select_by_dims(&lib, &b).unwrap(), want);
    }
}

#[test]
fn alignment_is_invertible_and_fits_the_box() {
    let lib = ModelLibrary::from_meshes(
        vec![("car".into(), procedural::car_mesh(4.2, 1.8, 1.5))],
        &LibraryFilter::default(),
    )
    .unwrap();
    let m = &lib.entries()[0];
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..50 {
        let b = random_box(&mut rng);
        let posed = align_model_to_box(m, &b).unwrap();
        let ShapeModel::Mesh(mm) = m else {
            unreachable!()
        };
        for (w, c) in posed.world_points().iter().zip(mm.mesh.vertices()) {
            assert!(posed.to_canonical(*w).distance(*c) <= 1e-9);
            assert!(b.contains_with_margin(*w, 1e-6));
        }
        // The posed tight box, measured in the box frame, equals the box dims.
        let (mut lo, mut hi) = (
            Point3::splat(f64::INFINITY),
            Point3::splat(f64::NEG_INFINITY),
        );
        for w in posed.world_points() {
            let q = b.to_local(*w);
            lo = lo.min(q);
            hi = hi.max(q);
        }
        assert!((hi - lo).distance(b.dims()) <= 1e-6);
    }
}

#[test]
fn cad_library_from_files_reports_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let path = save_mesh_library(
        &[
            ("bus".into(), procedural::car_mesh(11.0, 2.5, 3.2)),
            ("sedan".into(), procedural::car_mesh(4.4, 1.8, 1.45)),
            ("broken".into(), procedural::car_mesh(4.0, 1.8, 1.5)),
        ],
        dir.path(),
    )
    .unwrap();
    std::fs::write(dir.path().join("broken.obj"), "v 0 0 0\nf 1 2 3\n").unwrap();
    let mut manifest = LibraryManifest::load(&path).unwrap();
    manifest.entries[0].category = Some("emergency".into());
    manifest.save(&path).unwrap();

    let lib = build_library(&path, LibraryKind::Cad, &LibraryFilter::default()).unwrap();
    assert_eq!(lib.len(), 1);
    assert_eq!(lib.entries()[0].id(), "sedan");
    let report = lib.report().to_text();
    assert!(report.contains("bus"), "{report}");
    assert!(report.contains("broken"), "{report}");
    assert!(build_library(&path, LibraryKind::Point, &LibraryFilter::default()).is_err());
}

#[test]
fn point_library_round_trip_and_selection() {
    let spec = default_sensor("kitti").unwrap();
    let scenes = generate_toy_scenes(
        &ToySceneConfig {
            frames: 6,
            distance_range: [6.0, 12.0],
            seed: 21,
            ..Default::default()
        },
        &spec,
    );
    let mut models = Vec::new();
    for s in &scenes {
        let labels: Vec<Label> = s.boxes.iter().map(|b| Label::new(*b, 1.0)).collect();
        models.extend(extract_point_models(
            &s.frame,
            &labels,
            spec.origin,
            &format!("{}_", s.frame.id),
        ));
    }
    let dense = models.iter().filter(|m| m.points.len() >= 300).count();
    assert!(dense >= 3, "only {dense} dense instances");

    let dir = tempfile::tempdir().unwrap();
    let path = save_point_library(&models, dir.path()).unwrap();
    let lib = build_library(&path, LibraryKind::Point, &LibraryFilter::default()).unwrap();
    assert_eq!(lib.len(), dense);
    assert_eq!(lib.report().rejected.len(), models.len() - dense);

    // Querying with an instance's own points returns that instance.
    let s = &scenes[0];
    let (k, b) = s
        .boxes
        .iter()
        .enumerate()
        .find(|(k, _)| lib.get(&format!("{}_{k:04}", s.frame.id)).is_some())
        .expect("a dense instance in frame 0");
    let raw: Vec<Point3> =
        io::read_ply_points(dir.path().join(format!("{}_{k:04}.ply", s.frame.id)))
            .unwrap()
            .0;
    assert!(!raw.is_empty());
    let inside: Vec<Point3> = denoise_core::geom::points_in_box(&s.frame.points, b)
        .into_iter()
        .map(|i| s.frame.points[i])
        .collect();
    let chosen =
        select_best_point_model(&lib, b, &inside, spec.origin, &PointMatchConfig::default())
            .unwrap();
    assert_eq!(chosen.id(), format!("{}_{k:04}", s.frame.id));
}

#[test]
fn point_selection_needs_points_and_kind() {
    let cad = ModelLibrary::from_meshes(
        vec![("c".into(), procedural::car_mesh(4.0, 1.8, 1.5))],
        &LibraryFilter::default(),
    )
    .unwrap();
    let b = Box3D::new(10.0, 0.0, 0.8, 4.0, 1.8, 1.5, 0.0).unwrap();
    assert!(select_best_point_model(
        &cad,
        &b,
        &[b.center()],
        Point3::ZERO,
        &PointMatchConfig::default()
    )
    .is_err());
    let pts: Vec<Point3> = (0..400)
        .map(|i| {
            Point3::new(
                -0.95 + (i % 20) as f64 * 0.1,
                -0.475 + (i / 20) as f64 * 0.05,
                0.5,
            )
        })
        .collect();
    let pm = PointModel::new("p", pts, Point3::new(2.0, 1.0, 1.0), 0.0, 10.0);
    let lib = ModelLibrary::from_point_models(vec![pm], &LibraryFilter::default()).unwrap();
    assert!(
        select_best_point_model(&lib, &b, &[], Point3::ZERO, &PointMatchConfig::default()).is_err()
    );
}
