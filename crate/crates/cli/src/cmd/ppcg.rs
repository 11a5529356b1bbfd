use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use denoise_core::models::LibraryManifest;
use denoise_core::ppcg::{
    cf_training_sample, frame_seed, rc_training_sample, write_split_manifest, SetFlag,
    TrainingSample,
};

use crate::config::{load_frames, DataArgs, RunConfig, Skip};
use crate::manifest::{RunManifest, RunStatus};
use crate::Exit;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Rc,
    Cf,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Rc => "rc",
            Mode::Cf => "cf",
        }
    }
}

/// Generate pseudo point clouds for labeled frames.
#[derive(Debug, Args)]
pub struct PpcgArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// RC: boxes with at least this many interior points are left untouched.
    #[arg(long)]
    pub gate: Option<usize>,
    /// CF: minimum points per relocated scan.
    #[arg(long)]
    pub min_points: Option<usize>,
}

pub fn hash_inputs(m: &mut RunManifest, cfg: &RunConfig, frames: &[(String, std::path::PathBuf)]) {
    if let Some(p) = &cfg.manifest {
        m.add_input(p);
    }
    for (id, path) in frames {
        m.add_input(path);
        if let Some(dir) = &cfg.labels {
            m.add_input(&dir.join(format!("{id}.txt")));
        }
    }
    if let Some(lib) = &cfg.library {
        m.add_input(lib);
        if let Ok(man) = LibraryManifest::load(lib) {
            let base = lib.parent().unwrap_or(Path::new(""));
            for e in &man.entries {
                m.add_input(&base.join(&e.path));
            }
        }
    }
    if let Some(p) = &cfg.sensor_library {
        m.add_input(p);
    }
}

pub fn run(mode: Mode, args: &PpcgArgs) -> Result<Exit> {
    let mut cfg = args.data.merged()?;
    if let Some(g) = args.gate {
        cfg.ppcg.rc_max_points_gate = g;
    }
    if let Some(n) = args.min_points {
        cfg.ppcg.cf_min_points = n;
    }
    cfg.seed = Some(cfg.seed());
    cfg.ppcg.seed = cfg.seed();
    cfg.ppcg.validate().map_err(anyhow::Error::msg)?;
    let out = RunConfig::require(&cfg.out, "output directory (--out)")?.to_path_buf();
    let spec = cfg.sensor()?;
    let dataset = cfg.dataset()?;
    let t_load = Instant::now();
    let lib = cfg.library()?;
    RunConfig::require(&cfg.labels, "labels directory")?;
    let (frames, mut skipped) = load_frames(&cfg, &dataset);
    let load_time = t_load.elapsed();

    let seed = cfg.ppcg.seed;
    let results: Vec<Result<(TrainingSample, Duration), Skip>> = frames
        .par_iter()
        .map(|f| {
            let t = Instant::now();
            let labels = cfg.labels_for(&f.id).map_err(|e| Skip {
                id: f.id.clone(),
                reason: crate::describe(&e),
            })?;
            let sample = match mode {
                Mode::Rc => rc_training_sample(f, &labels, &lib, &spec, &cfg.ppcg),
                Mode::Cf => {
                    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(seed, &f.id));
                    cf_training_sample(f, &labels, &lib, &spec, &cfg.ppcg, &mut rng)
                }
            };
            sample.write(&out).map_err(|e| Skip {
                id: f.id.clone(),
                reason: e.to_string(),
            })?;
            Ok((sample, t.elapsed()))
        })
        .collect();

    let mut ids = Vec::new();
    let mut times = Vec::new();
    let (mut boxes, mut points, mut flagged) = (0usize, 0usize, 0usize);
    for r in results {
        match r {
            Ok((s, dt)) => {
                boxes += s.sidecar.len();
                points += s.sidecar.iter().map(|r| r.point_count).sum::<usize>();
                flagged += s
                    .sidecar
                    .iter()
                    .filter(|r| r.flags.iter().any(|f| !matches!(f, SetFlag::Retried)))
                    .count();
                ids.push(s.frame.id);
                times.push(dt);
            }
            Err(skip) => {
                log::warn!("skipping frame {}: {}", skip.id, skip.reason);
                skipped.push(skip);
            }
        }
    }
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_split_manifest(&out, &ids, &spec.name, mode.name())?;

    let mut m = RunManifest::new(mode.name(), &cfg);
    let entries: Vec<_> = dataset
        .frames
        .iter()
        .map(|e| (e.id.clone(), dataset.frame_path(e)))
        .collect();
    hash_inputs(&mut m, &cfg, &entries);
    m.time("load", &[load_time]);
    m.time("frame", &times);
    m.skipped = skipped;
    m.status = if m.skipped.is_empty() {
        RunStatus::Ok
    } else {
        RunStatus::Partial
    };
    m.summary = json!({
        "frames_written": ids.len(),
        "frames_skipped": m.skipped.len(),
        "boxes": boxes,
        "pseudo_points": points,
        "boxes_flagged": flagged,
    });
    m.collect_outputs(&out)?;
    m.write(&out)?;
    let t = &m.timings["frame"];
    println!(
        "{}: {} frames written, {} skipped, {} boxes, {} pseudo points; per frame mean {:.1} ms, p95 {:.1} ms",
        mode.name(),
        ids.len(),
        m.skipped.len(),
        boxes,
        points,
        t.mean_s * 1e3,
        t.p95_s * 1e3
    );
    Ok(if m.skipped.is_empty() {
        Exit::Ok
    } else {
        Exit::Partial
    })
}
