use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde_json::json;

use denoise_core::ptsn::{
    curve_csv, dali_iterate, ptsn_search, Detector, DetectorProvider, FixedDetector, IterateConfig,
    Metric, ReplayDetector, ReplaySchedule, StageStatus, SyntheticDetector,
};

use crate::cmd::ppcg::hash_inputs;
use crate::config::{load_frames, parse_triple, DataArgs, DetectorSpec, RunConfig, DEFAULT_SEED};
use crate::manifest::{write_atomic, RunManifest, RunStatus};
use crate::Exit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DetectorKind {
    Synthetic,
    Replay,
}

/// Search the scale that matches the detector's predicted mean size to the target estimate.
#[derive(Debug, Args)]
pub struct PtsnArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub detector: Option<DetectorKind>,
    /// Replay file for `--detector replay`.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Source mean size l,w,h for `--detector synthetic`.
    #[arg(long, value_parser = parse_triple)]
    pub source_mean: Option<[f64; 3]>,
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Estimated target mean size l,w,h.
    #[arg(long, value_parser = parse_triple)]
    pub est_mean: Option<[f64; 3]>,
    /// SN/ROS size statistics JSON, used when no estimate is given.
    #[arg(long)]
    pub size_stats: Option<PathBuf>,
    /// Scale grid lo,hi,step.
    #[arg(long, value_parser = parse_triple)]
    pub grid: Option<[f64; 3]>,
    #[arg(long)]
    pub metric: Option<Metric>,
    #[arg(long)]
    pub confidence_floor: Option<f64>,
}

impl PtsnArgs {
    fn merged(&self) -> Result<RunConfig> {
        let mut cfg = self.data.merged()?;
        let p = &mut cfg.ptsn;
        if self.est_mean.is_some() {
            p.estimated_mean = self.est_mean;
        }
        if self.size_stats.is_some() {
            p.size_statistics.clone_from(&self.size_stats);
        }
        if self.grid.is_some() {
            p.grid = self.grid;
            p.scales = None;
        }
        if self.metric.is_some() {
            p.metric = self.metric;
        }
        if self.confidence_floor.is_some() {
            p.confidence_floor = self.confidence_floor;
        }
        match self.detector {
            Some(DetectorKind::Replay) => {
                let Some(path) = self.replay.clone() else {
                    bail!("--detector replay needs --replay <file>");
                };
                cfg.detector = Some(DetectorSpec::Replay { path });
            }
            Some(DetectorKind::Synthetic) => {
                let (mean, jitter) = match &cfg.detector {
                    Some(DetectorSpec::Synthetic {
                        source_mean,
                        jitter,
                        ..
                    }) => (*source_mean, *jitter),
                    _ => (denoise_core::toy::WAYMO_MEAN, 0.0),
                };
                cfg.detector = Some(DetectorSpec::Synthetic {
                    source_mean: self.source_mean.unwrap_or(mean),
                    jitter: self.jitter.unwrap_or(jitter),
                    seed: Some(cfg.seed()),
                });
            }
            None => {
                if let Some(path) = &self.replay {
                    cfg.detector = Some(DetectorSpec::Replay { path: path.clone() });
                }
                if let Some(DetectorSpec::Synthetic {
                    source_mean,
                    jitter,
                    ..
                }) = &mut cfg.detector
                {
                    if let Some(m) = self.source_mean {
                        *source_mean = m;
                    }
                    if let Some(j) = self.jitter {
                        *jitter = j;
                    }
                }
            }
        }
        cfg.seed = Some(cfg.seed());
        Ok(cfg)
    }
}

pub fn single_detector(spec: &DetectorSpec) -> Result<Arc<dyn Detector>> {
    Ok(match spec {
        DetectorSpec::Synthetic {
            source_mean,
            jitter,
            seed,
        } => Arc::new(SyntheticDetector::new(
            *source_mean,
            *jitter,
            seed.unwrap_or(DEFAULT_SEED),
        )?),
        DetectorSpec::Replay { path } => Arc::new(
            ReplayDetector::load(path)
                .with_context(|| format!("loading replay file {}", path.display()))?,
        ),
        DetectorSpec::ReplaySchedule { .. } => bail!("a replay schedule needs the iterate command"),
    })
}

fn detector_inputs(m: &mut RunManifest, spec: &DetectorSpec) {
    match spec {
        DetectorSpec::Replay { path } => m.add_input(path),
        DetectorSpec::ReplaySchedule { paths } => paths.iter().for_each(|p| m.add_input(p)),
        DetectorSpec::Synthetic { .. } => {}
    }
}

pub fn run(args: &PtsnArgs) -> Result<Exit> {
    let cfg = args.merged()?;
    let out = RunConfig::require(&cfg.out, "output directory (--out)")?.to_path_buf();
    let Some(det_spec) = &cfg.detector else {
        bail!("no detector given (--detector or config `detector`)");
    };
    // Everything that can fail on input is checked before the run directory is touched.
    let det = single_detector(det_spec)?;
    let ptsn = cfg.ptsn_config()?;
    let dataset = cfg.dataset()?;
    let (frames, skipped) = load_frames(&cfg, &dataset);

    let t = Instant::now();
    let r = ptsn_search(det.as_ref(), &frames, &ptsn)?;
    let search_time = t.elapsed();

    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_atomic(&out.join("curve.csv"), curve_csv(&r.curve).as_bytes())?;
    write_atomic(&out.join("ptsn.json"), &serde_json::to_vec_pretty(&r)?)?;

    let mut m = RunManifest::new("ptsn", &cfg);
    let entries: Vec<_> = dataset
        .frames
        .iter()
        .map(|e| (e.id.clone(), dataset.frame_path(e)))
        .collect();
    hash_inputs(&mut m, &cfg, &entries);
    detector_inputs(&mut m, det_spec);
    if let Some(p) = &cfg.ptsn.size_statistics {
        m.add_input(p);
    }
    m.time("search", &[search_time]);
    m.skipped = skipped;
    m.status = if m.skipped.is_empty() {
        RunStatus::Ok
    } else {
        RunStatus::Partial
    };
    let best = r.best();
    m.summary = json!({
        "scale": r.scale,
        "metric": r.metric,
        "detector": det.describe(),
        "predicted_mean_lwh": best.mean.dims(),
        "estimated_mean_lwh": ptsn.estimated_mean,
        "residual": best.residual,
        "frames_used": best.mean.frames_used,
        "grid_points": r.curve.len(),
    });
    m.collect_outputs(&out)?;
    m.write(&out)?;
    let d = best.mean.dims();
    println!(
        "ptsn: scale {:.2} ({:?}), predicted mean [{:.3}, {:.3}, {:.3}] vs estimate [{:.3}, {:.3}, {:.3}], {} grid points, {:.2} s",
        r.scale,
        r.metric,
        d[0],
        d[1],
        d[2],
        ptsn.estimated_mean[0],
        ptsn.estimated_mean[1],
        ptsn.estimated_mean[2],
        r.curve.len(),
        search_time.as_secs_f64()
    );
    Ok(if m.skipped.is_empty() {
        Exit::Ok
    } else {
        Exit::Partial
    })
}

/// Run or resume the full denoising loop described by a config file.
#[derive(Debug, Args)]
pub struct IterateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Stop after this many stages (the run can be resumed later).
    #[arg(long)]
    pub stop_after_stages: Option<usize>,
}

pub fn iterate(args: &IterateArgs) -> Result<Exit> {
    let mut cfg = args.data.merged()?;
    if args.iterations.is_some() {
        cfg.iterations = args.iterations;
    }
    cfg.seed = Some(cfg.seed());
    cfg.ppcg.seed = cfg.seed();
    let out = RunConfig::require(&cfg.out, "output directory (--out)")?.to_path_buf();
    let Some(det_spec) = &cfg.detector else {
        bail!("no detector given (config `detector`)");
    };
    let provider: Box<dyn DetectorProvider> = match det_spec {
        DetectorSpec::ReplaySchedule { paths } => Box::new(ReplaySchedule {
            paths: paths.clone(),
        }),
        other => Box::new(FixedDetector(single_detector(other)?)),
    };
    let icfg = IterateConfig {
        iterations: cfg.iterations.unwrap_or(1),
        ptsn: cfg.ptsn_config()?,
        ppcg: cfg.ppcg.clone(),
        seed: cfg.seed(),
        source_manifest: cfg.source_manifest.clone(),
        stop_after_stages: args.stop_after_stages,
    };
    let spec = cfg.sensor()?;
    let lib = cfg.library()?;
    let dataset = cfg.dataset()?;
    let (frames, skipped) = load_frames(&cfg, &dataset);

    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let t = Instant::now();
    let outcome = dali_iterate(provider.as_ref(), &frames, &lib, &spec, &icfg, &out)?;
    let elapsed = t.elapsed();

    let mut m = RunManifest::new("iterate", &cfg);
    let entries: Vec<_> = dataset
        .frames
        .iter()
        .map(|e| (e.id.clone(), dataset.frame_path(e)))
        .collect();
    hash_inputs(&mut m, &cfg, &entries);
    detector_inputs(&mut m, det_spec);
    m.time("iterate", &[elapsed]);
    m.skipped = skipped;
    m.status = match (outcome.status, m.skipped.is_empty()) {
        (StageStatus::Complete, true) => RunStatus::Ok,
        (StageStatus::Complete, false) => RunStatus::Partial,
        _ => RunStatus::Paused,
    };
    m.summary = json!({
        "iterations": icfg.iterations,
        "status": outcome.status,
        "scales": outcome.scales,
        "next": outcome.next.map(|(k, s)| json!({"iteration": k, "stage": s})),
        "frames": frames.len(),
    });
    m.collect_outputs(&out)?;
    m.write(&out)?;
    match outcome.next {
        None => println!(
            "iterate: complete, {} iteration(s), scales {:?}, {:.2} s",
            icfg.iterations,
            outcome.scales,
            elapsed.as_secs_f64()
        ),
        Some((k, s)) => println!(
            "iterate: paused before iteration {k} stage {s:?}, scales so far {:?}; rerun to resume",
            outcome.scales
        ),
    }
    Ok(if m.status == RunStatus::Ok {
        Exit::Ok
    } else {
        Exit::Partial
    })
}
