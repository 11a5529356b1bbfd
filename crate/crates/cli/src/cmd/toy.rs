use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde_json::json;

use denoise_core::geom::{scale_frame, Point3};
use denoise_core::io::{self, DatasetManifest};
use denoise_core::procedural::uv_sphere;
use denoise_core::ptsn::{
    format_replay, Detector, ReplayRecord, SizeStatistics, SyntheticDetector,
};
use denoise_core::sensor::{default_sensor_library, write_sensor_library};
use denoise_core::toy::{write_toy_dataset, ToySceneConfig, KITTI_MEAN, WAYMO_MEAN};

use crate::config::{parse_triple, RunConfig, DEFAULT_SEED};
use crate::manifest::write_atomic;
use crate::Exit;

/// Write a synthetic dataset with a CAD library, configs and a replay file.
#[derive(Debug, Args)]
pub struct ToyArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub frames: usize,
    #[arg(long, default_value = "kitti")]
    pub sensor: String,
    /// Ground points kept within this planar range, meters; 0 for none.
    #[arg(long, default_value_t = 25.0)]
    pub ground_range: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Scales at which the synthetic detector's output is recorded into replay.jsonl.
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    pub replay_scales: Vec<f64>,
    /// Source mean l,w,h given to the synthetic detector.
    #[arg(long, value_parser = parse_triple, default_value = "4.66,2.08,1.73")]
    pub source_mean: [f64; 3],
}

pub fn run(args: &ToyArgs) -> Result<Exit> {
    let cfg = RunConfig {
        sensor: Some(args.sensor.clone()),
        ..Default::default()
    };
    let spec = cfg.sensor()?;
    let scene = ToySceneConfig {
        frames: args.frames,
        ground_range: args.ground_range,
        seed: args.seed,
        ..Default::default()
    };
    let ds = write_toy_dataset(&args.out, &scene, &spec)?;
    let out = &args.out;

    write_sensor_library(&default_sensor_library(), out.join("sensors.json"))?;
    io::write_obj(
        &uv_sphere(Point3::ZERO, 1.0, 48, 24),
        out.join("sphere.obj"),
    )?;
    let stats = SizeStatistics {
        source_mean_lwh: WAYMO_MEAN,
        target_mean_lwh: Some(KITTI_MEAN),
        target_offset_lwh: None,
    };
    write_atomic(
        &out.join("size_stats.json"),
        &serde_json::to_vec_pretty(&stats)?,
    )?;

    let det = SyntheticDetector::new(args.source_mean, 0.0, args.seed)?;
    let manifest = DatasetManifest::load(&ds.manifest)?;
    let mut records = Vec::new();
    for e in &manifest.frames {
        let mut f = io::read_point_bin(manifest.frame_path(e))?;
        f.id.clone_from(&e.id);
        for &s in &args.replay_scales {
            let d = det.detect(&scale_frame(&f, s)?, s)?;
            records.push(ReplayRecord::from_detections(&d, s));
        }
    }
    write_atomic(
        &out.join("replay.jsonl"),
        format_replay(&records).as_bytes(),
    )?;

    let pipeline = json!({
        "manifest": "manifest.json",
        "labels": "labels",
        "library": "library/library.json",
        "sensor": spec.name,
        "detector": {"kind": "synthetic", "source_mean": args.source_mean, "jitter": 0.0},
        "ptsn": {"estimated_mean": KITTI_MEAN, "grid": [0.8, 1.4, 0.01], "metric": "DIMS_L2"},
        "iterations": 1,
        "seed": args.seed,
    });
    let text = serde_json::to_string_pretty(&pipeline)? + "\n";
    write_atomic(&out.join("pipeline.json"), text.as_bytes()).context("writing pipeline.json")?;
    println!(
        "toy: {} frames, labels, library, sensors.json, replay.jsonl, size_stats.json, pipeline.json under {}",
        manifest.frames.len(),
        out.display()
    );
    Ok(Exit::Ok)
}
