use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::Args;
use serde_json::Value;

use denoise_core::io::{self, DatasetManifest};
use denoise_core::models::{build_library, LibraryFilter, LibraryManifest};
use denoise_core::ptsn::{ReplayDetector, SizeStatistics};
use denoise_core::sensor::load_sensor_library;

use crate::config::RunConfig;
use crate::Exit;

/// Lint dataset files: point bins, labels, PLY/OBJ meshes, manifests, replay files.
#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Files or directories (searched recursively).
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
}

enum Verdict {
    Ok(String),
    Skipped,
}

fn files_under(p: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if p.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(p)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        entries.sort();
        for e in entries {
            files_under(&e, out)?;
        }
    } else {
        out.push(p.to_path_buf());
    }
    Ok(())
}

fn check_json(path: &Path) -> Result<Verdict> {
    let text = std::fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)?;
    let has = |k: &str| v.get(k).is_some();
    if has("frames") && v["frames"].is_array() {
        let m = DatasetManifest::load(path)?;
        if let Err(problems) = m.validate() {
            bail!("{}", problems.join("; "));
        }
        return Ok(Verdict::Ok(format!(
            "dataset manifest, {} frames",
            m.frames.len()
        )));
    }
    if has("kind") && has("entries") {
        let m = LibraryManifest::load(path)?;
        let lib = build_library(path, m.kind, &LibraryFilter::default())?;
        let report = lib.report();
        let parse_errors: Vec<_> = report
            .rejected
            .iter()
            .filter(|r| r.reason.starts_with("parse error"))
            .collect();
        if let Some(r) = parse_errors.first() {
            bail!("asset {}: {}", r.id, r.reason);
        }
        return Ok(Verdict::Ok(format!(
            "{:?} library, {} accepted, {} rejected by filter",
            m.kind,
            lib.len(),
            report.rejected.len()
        )));
    }
    if v.as_array()
        .is_some_and(|a| a.iter().all(|x| x.get("beams").is_some()))
        && v.as_array().is_some_and(|a| !a.is_empty())
    {
        let specs = load_sensor_library(path)?;
        return Ok(Verdict::Ok(format!(
            "sensor library, {} sensors",
            specs.len()
        )));
    }
    if has("source_mean_lwh") {
        let s = SizeStatistics::load(path)?;
        let e = s.estimate();
        return Ok(Verdict::Ok(format!(
            "size statistics, estimate [{:.3}, {:.3}, {:.3}]",
            e[0], e[1], e[2]
        )));
    }
    if ["manifest", "library", "detector", "ptsn", "ppcg"]
        .iter()
        .any(|k| has(k))
    {
        let cfg = RunConfig::load(path)?;
        let mut missing = Vec::new();
        for p in [
            &cfg.manifest,
            &cfg.labels,
            &cfg.library,
            &cfg.sensor_library,
        ]
        .into_iter()
        .flatten()
        {
            if !p.exists() {
                missing.push(p.display().to_string());
            }
        }
        if !missing.is_empty() {
            bail!(
                "run config references missing paths: {}",
                missing.join(", ")
            );
        }
        cfg.sensor()?;
        return Ok(Verdict::Ok("run config".into()));
    }
    Ok(Verdict::Ok("json".into()))
}

fn check(path: &Path) -> Result<Verdict> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    Ok(match ext.as_str() {
        "bin" => Verdict::Ok(format!("{} points", io::read_point_bin(path)?.len())),
        "txt" => Verdict::Ok(format!("{} boxes", io::read_labels(path)?.len())),
        "ply" => {
            let ply = io::read_ply(path)?;
            let counts: Vec<String> = ply
                .elements
                .iter()
                .map(|e| format!("{} {}", e.count, e.name))
                .collect();
            Verdict::Ok(format!("ply, {}", counts.join(", ")))
        }
        "obj" => {
            let (mesh, clean) = io::read_mesh(path)?;
            Verdict::Ok(format!(
                "{} triangles, {} degenerate dropped",
                mesh.triangle_count(),
                clean.degenerate_dropped
            ))
        }
        "jsonl" => {
            let r = ReplayDetector::load(path)?;
            Verdict::Ok(format!("replay, {} frames", r.frame_ids().len()))
        }
        "json" => check_json(path)?,
        _ => Verdict::Skipped,
    })
}

pub fn run(args: &ValidateArgs) -> Result<Exit> {
    let mut files = Vec::new();
    for p in &args.paths {
        if !p.exists() {
            bail!("{} does not exist", p.display());
        }
        files_under(p, &mut files)?;
    }
    let (mut ok, mut bad, mut skipped) = (0, 0, 0);
    for f in &files {
        match check(f) {
            Ok(Verdict::Ok(what)) => {
                ok += 1;
                println!("ok    {}: {what}", f.display());
            }
            Ok(Verdict::Skipped) => skipped += 1,
            Err(e) => {
                bad += 1;
                println!("FAIL  {}: {}", f.display(), crate::describe(&e));
            }
        }
    }
    println!("validate: {ok} ok, {bad} failed, {skipped} not checked");
    if bad > 0 {
        bail!("{bad} file(s) failed validation");
    }
    Ok(Exit::Ok)
}
