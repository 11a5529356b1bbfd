//! Small synthetic datasets: car meshes placed on a flat ground and scanned
//! with a sensor spec. Used by tests, fixtures and the CLI's `toy` generator.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frame::Frame;
use crate::geom::{Box3D, Bvh, Point3, TriangleMesh};
use crate::io::{self, DatasetManifest, FrameEntry, IoError, Label};
use crate::models::{save_mesh_library, ModelError};
use crate::procedural::{car_mesh, merge};
use crate::sensor::{generate_scan_rays, SensorSpec};

/// Mean car size (l, w, h) in meters, per dataset.
pub const KITTI_MEAN: [f64; 3] = [3.89, 1.62, 1.53];
pub const WAYMO_MEAN: [f64; 3] = [4.66, 2.08, 1.73];
pub const NUSCENES_MEAN: [f64; 3] = [4.63, 1.96, 1.73];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySceneConfig {
    pub frames: usize,
    pub cars_min: usize,
    pub cars_max: usize,
    /// Mean car dims (l, w, h); each car is jittered by ±`dims_jitter` relative.
    pub dims_mean: [f64; 3],
    pub dims_jitter: f64,
    pub distance_range: [f64; 2],
    /// Ground points are kept within this planar range; 0 disables ground.
    pub ground_range: f64,
    pub seed: u64,
}

impl Default for ToySceneConfig {
    fn default() -> Self {
        Self {
            frames: 10,
            cars_min: 2,
            cars_max: 4,
            dims_mean: KITTI_MEAN,
            dims_jitter: 0.08,
            distance_range: [8.0, 35.0],
            ground_range: 25.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyFrame {
    pub frame: Frame,
    pub boxes: Vec<Box3D>,
}

fn pose_mesh(mesh: &TriangleMesh, b: &Box3D) -> TriangleMesh {
    mesh.map_vertices(|v| b.to_world(Point3::new(v.x, v.y, v.z - 0.5 * b.h)))
}

/// Scans `boxes` (filled with procedural cars) and a flat ground at z = 0.
pub fn scan_scene(id: &str, boxes: &[Box3D], spec: &SensorSpec, ground_range: f64) -> Frame {
    let mut frame = Frame::empty(id).with_sensor(spec.name.clone());
    let cars: Vec<TriangleMesh> = boxes
        .iter()
        .map(|b| pose_mesh(&car_mesh(b.l, b.w, b.h), b))
        .collect();
    let scene = (!cars.is_empty()).then(|| {
        let m = merge(&cars);
        let bvh = Bvh::build(&m).expect("cars have triangles");
        (m, bvh)
    });
    for ray in generate_scan_rays(spec, None).rays {
        let car_hit = scene.as_ref().and_then(|(m, bvh)| bvh.cast_ray(m, &ray));
        let ground_t =
            (ray.direction.z < 0.0 && ray.origin.z > 0.0).then(|| -ray.origin.z / ray.direction.z);
        match (car_hit, ground_t) {
            (Some(h), g) if g.is_none_or(|t| h.t <= t) => {
                frame.push(h.point, 0.3 + 0.4 * (h.triangle % 2) as f64);
            }
            (_, Some(t)) => {
                let mut p = ray.at(t);
                p.z = 0.0;
                if ground_range > 0.0 && p.planar_norm() <= ground_range {
                    frame.push(p, 0.1);
                }
            }
            _ => {}
        }
    }
    frame
}

/// Deterministic toy frames for a seed.
pub fn generate_toy_scenes(cfg: &ToySceneConfig, spec: &SensorSpec) -> Vec<ToyFrame> {
    (0..cfg.frames)
        .map(|i| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(1_000_003).wrapping_add(i as u64));
            let n = rng.gen_range(cfg.cars_min..=cfg.cars_max.max(cfg.cars_min));
            let mut boxes: Vec<Box3D> = Vec::new();
            let mut attempts = 0;
            while boxes.len() < n && attempts < 200 {
                attempts += 1;
                let j = |rng: &mut ChaCha8Rng, m: f64| {
                    m * (1.0 + cfg.dims_jitter * rng.gen_range(-1.0..=1.0))
                };
                let (l, w, h) = (
                    j(&mut rng, cfg.dims_mean[0]),
                    j(&mut rng, cfg.dims_mean[1]),
                    j(&mut rng, cfg.dims_mean[2]),
                );
                let r = rng.gen_range(cfg.distance_range[0]..cfg.distance_range[1]);
                let az = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                let b = Box3D::new(r * az.cos(), r * az.sin(), 0.5 * h, l, w, h, heading)
                    .expect("positive dims");
                let clear = boxes.iter().all(|o| {
                    let gap = 0.5 * (o.l + b.l) + 2.5;
                    (o.x - b.x).hypot(o.y - b.y) > gap
                });
                if clear {
                    boxes.push(b);
                }
            }
            let frame = scan_scene(&format!("{i:06}"), &boxes, spec, cfg.ground_range);
            ToyFrame { frame, boxes }
        })
        .collect()
}

/// A handful of car meshes spanning common sizes, for a CAD library.
pub fn toy_car_meshes() -> Vec<(String, TriangleMesh)> {
    [
        (3.6, 1.60, 1.45),
        (3.9, 1.62, 1.53),
        (4.2, 1.75, 1.50),
        (4.6, 1.85, 1.60),
        (4.7, 2.05, 1.75),
        (5.1, 2.00, 1.90),
    ]
    .iter()
    .enumerate()
    .map(|(i, &(l, w, h))| (format!("car{i:02}"), car_mesh(l, w, h)))
    .collect()
}

#[derive(Debug, Clone)]
pub struct ToyDataset {
    pub root: PathBuf,
    pub manifest: PathBuf,
    pub labels_dir: PathBuf,
    pub library: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum ToyError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Writes frames (`frames/*.bin`), ground-truth labels (`labels/*.txt`), a
/// dataset manifest and a CAD library under `dir`.
pub fn write_toy_dataset(
    dir: impl AsRef<Path>,
    cfg: &ToySceneConfig,
    spec: &SensorSpec,
) -> Result<ToyDataset, ToyError> {
    let dir = dir.as_ref();
    let scenes = generate_toy_scenes(cfg, spec);
    let mut frames = Vec::new();
    for s in &scenes {
        let rel = PathBuf::from("frames").join(format!("{}.bin", s.frame.id));
        io::write_point_bin(&s.frame, dir.join(&rel))?;
        let labels: Vec<Label> = s.boxes.iter().map(|b| Label::new(*b, 1.0)).collect();
        io::write_labels(
            &labels,
            dir.join("labels").join(format!("{}.txt", s.frame.id)),
        )?;
        frames.push(FrameEntry {
            id: s.frame.id.clone(),
            path: rel,
            sensor: spec.name.clone(),
        });
    }
    let manifest = dir.join("manifest.json");
    DatasetManifest {
        root: PathBuf::from("."),
        split: "toy".into(),
        frames,
    }
    .save(&manifest)?;
    let library = save_mesh_library(&toy_car_meshes(), dir.join("library"))?;
    Ok(ToyDataset {
        root: dir.to_path_buf(),
        manifest,
        labels_dir: dir.join("labels"),
        library,
    })
}
