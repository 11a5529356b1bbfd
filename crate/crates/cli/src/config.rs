//! Run configuration: one JSON document per run, overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use denoise_core::frame::Frame;
use denoise_core::io::{self, DatasetManifest, Label};
use denoise_core::models::{
    build_library, LibraryFilter, LibraryKind, LibraryManifest, ModelLibrary,
};
use denoise_core::ppcg::PpcgConfig;
use denoise_core::ptsn::{scale_grid, Metric, PtsnConfig, SizeStatistics};
use denoise_core::sensor::{default_sensor_library, find_sensor, load_sensor_library, SensorSpec};

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorSpec {
    Synthetic {
        source_mean: [f64; 3],
        #[serde(default)]
        jitter: f64,
        /// Defaults to the run seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Replay {
        path: PathBuf,
    },
    /// One replay file per iteration, for `iterate`.
    ReplaySchedule {
        paths: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PtsnSection {
    /// `[lo, hi, step]`; ignored when `scales` is given.
    pub grid: Option<[f64; 3]>,
    pub scales: Option<Vec<f64>>,
    pub metric: Option<Metric>,
    pub estimated_mean: Option<[f64; 3]>,
    /// SN/ROS statistics file used when `estimated_mean` is absent.
    pub size_statistics: Option<PathBuf>,
    pub confidence_floor: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub library: Option<PathBuf>,
    pub library_kind: Option<LibraryKind>,
    pub library_filter: LibraryFilter,
    pub sensor: Option<String>,
    pub sensor_library: Option<PathBuf>,
    /// Added to every z on load.
    pub ground_shift: f64,
    pub ppcg: PpcgConfig,
    pub ptsn: PtsnSection,
    pub detector: Option<DetectorSpec>,
    pub iterations: Option<usize>,
    pub source_manifest: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        Ok(cfg)
    }

    /// Makes relative paths relative to `base` (the config file's directory).
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(x) = p.as_mut().filter(|x| x.is_relative()) {
                *x = base.join(&*x);
            }
        };
        fix(&mut self.manifest);
        fix(&mut self.labels);
        fix(&mut self.library);
        fix(&mut self.sensor_library);
        fix(&mut self.source_manifest);
        fix(&mut self.out);
        fix(&mut self.ptsn.size_statistics);
        match &mut self.detector {
            Some(DetectorSpec::Replay { path }) if path.is_relative() => *path = base.join(&*path),
            Some(DetectorSpec::ReplaySchedule { paths }) => {
                for p in paths.iter_mut().filter(|p| p.is_relative()) {
                    *p = base.join(&*p);
                }
            }
            _ => {}
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn require<'a>(v: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        match v {
            Some(p) => Ok(p),
            None => bail!("no {what} given (flag or config file)"),
        }
    }

    pub fn sensor(&self) -> Result<SensorSpec> {
        let name = self.sensor.as_deref().unwrap_or("kitti");
        let lib = match &self.sensor_library {
            Some(p) => load_sensor_library(p)
                .with_context(|| format!("loading sensor library {}", p.display()))?,
            None => default_sensor_library(),
        };
        Ok(find_sensor(&lib, name)?.clone())
    }

    pub fn library(&self) -> Result<ModelLibrary> {
        let path = Self::require(&self.library, "model library")?;
        let kind = match self.library_kind {
            Some(k) => k,
            None => {
                LibraryManifest::load(path)
                    .with_context(|| format!("loading library manifest {}", path.display()))?
                    .kind
            }
        };
        let lib = build_library(path, kind, &self.library_filter)
            .with_context(|| format!("building library from {}", path.display()))?;
        for r in &lib.report().rejected {
            log::info!("library: rejected {}: {}", r.id, r.reason);
        }
        Ok(lib)
    }

    pub fn ptsn_config(&self) -> Result<PtsnConfig> {
        let p = &self.ptsn;
        let estimated_mean = match (p.estimated_mean, &p.size_statistics) {
            (Some(m), _) => m,
            (None, Some(path)) => SizeStatistics::load(path)
                .with_context(|| format!("loading size statistics {}", path.display()))?
                .estimate(),
            (None, None) => bail!(
                "no estimated target mean (ptsn.estimated_mean, --est-mean or size statistics)"
            ),
        };
        let mut cfg = PtsnConfig::new(estimated_mean);
        if let Some(s) = &p.scales {
            cfg.scale_grid = s.clone();
        } else if let Some([lo, hi, step]) = p.grid {
            cfg.scale_grid = scale_grid(lo, hi, step);
        }
        if let Some(m) = p.metric {
            cfg.metric = m;
        }
        if let Some(f) = p.confidence_floor {
            cfg.confidence_floor = f;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dataset(&self) -> Result<DatasetManifest> {
        let path = Self::require(&self.manifest, "dataset manifest")?;
        DatasetManifest::load(path)
            .with_context(|| format!("loading dataset manifest {}", path.display()))
    }

    pub fn labels_for(&self, frame_id: &str) -> Result<Vec<Label>> {
        let dir = Self::require(&self.labels, "labels directory")?;
        let path = dir.join(format!("{frame_id}.txt"));
        Ok(io::read_labels(&path)?)
    }
}

/// Flags shared by the dataset-driven commands. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset manifest (JSON).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory of `<frame id>.txt` label files.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Model library manifest.
    #[arg(long, env = "DENOISE_LIBRARY")]
    pub library: Option<PathBuf>,
    /// Sensor name.
    #[arg(long)]
    pub sensor: Option<String>,
    /// Sensor library JSON; the bundled one is used otherwise.
    #[arg(long, env = "DENOISE_SENSORS")]
    pub sensor_library: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl DataArgs {
    pub fn merged(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let over = |dst: &mut Option<PathBuf>, src: &Option<PathBuf>| {
            if src.is_some() {
                dst.clone_from(src);
            }
        };
        over(&mut cfg.manifest, &self.manifest);
        over(&mut cfg.labels, &self.labels);
        over(&mut cfg.library, &self.library);
        over(&mut cfg.sensor_library, &self.sensor_library);
        over(&mut cfg.out, &self.out);
        if self.sensor.is_some() {
            cfg.sensor.clone_from(&self.sensor);
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        let run_seed = cfg.seed();
        if let Some(DetectorSpec::Synthetic { seed, .. }) = &mut cfg.detector {
            seed.get_or_insert(run_seed);
        }
        Ok(cfg)
    }
}

/// A frame that could not be used, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skip {
    pub id: String,
    pub reason: String,
}

/// Reads every manifest frame; unreadable ones are reported, not fatal.
pub fn load_frames(cfg: &RunConfig, manifest: &DatasetManifest) -> (Vec<Frame>, Vec<Skip>) {
    let mut frames = Vec::new();
    let mut skipped = Vec::new();
    for e in &manifest.frames {
        match io::read_point_bin(manifest.frame_path(e)) {
            Ok(f) => {
                let mut f = io::apply_ground_shift(&f, cfg.ground_shift);
                f.id.clone_from(&e.id);
                frames.push(f.with_sensor(e.sensor.clone()));
            }
            Err(err) => {
                log::warn!("skipping frame {}: {err}", e.id);
                skipped.push(Skip {
                    id: e.id.clone(),
                    reason: err.to_string(),
                });
            }
        }
    }
    (frames, skipped)
}

/// Parses `a,b,c` into three floats.
pub fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected 3 comma-separated values, got {}", v.len()))
}
