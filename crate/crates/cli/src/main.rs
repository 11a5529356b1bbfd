//! `denoise`: pseudo-label denoising for LiDAR 3D detection.
//!
//! Exit codes: 0 success, 1 partial (frames skipped or run paused), 2 bad
//! configuration or input.

mod cmd;
mod config;
mod manifest;

use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use cmd::{bench, ppcg, ptsn, scan, toy, validate};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok,
    Partial,
}

#[derive(Debug, Parser)]
#[command(
    name = "denoise",
    version,
    about = "Pseudo-label denoising for LiDAR 3D object detection"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    Scan(scan::ScanArgs),
    /// Ray-constrained pseudo points: re-shoot each box's rays against a fitted model.
    Rc(ppcg::PpcgArgs),
    /// Constraint-free pseudo points: scan each model relocated to far range.
    Cf(ppcg::PpcgArgs),
    Ptsn(ptsn::PtsnArgs),
    Iterate(ptsn::IterateArgs),
    Validate(validate::ValidateArgs),
    Bench(bench::BenchArgs),
    Toy(toy::ToyArgs),
}

/// Join an error chain, dropping causes whose text the outer message already ends with.
pub fn describe(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let c = cause.to_string();
        if msg.ends_with(&c) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&c);
    }
    msg
}

fn run(cli: &Cli) -> Result<Exit> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()?;
    }
    match &cli.command {
        Command::Scan(a) => scan::run(a),
        Command::Rc(a) => ppcg::run(ppcg::Mode::Rc, a),
        Command::Cf(a) => ppcg::run(ppcg::Mode::Cf, a),
        Command::Ptsn(a) => ptsn::run(a),
        Command::Iterate(a) => ptsn::iterate(a),
        Command::Validate(a) => validate::run(a),
        Command::Bench(a) => bench::run(a),
        Command::Toy(a) => toy::run(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Exit::Ok) => ExitCode::SUCCESS,
        Ok(Exit::Partial) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}
