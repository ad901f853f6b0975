//! Command-line front end for weakly supervised video instance segmentation
//! with flow-guided seeds and temporal mask consistency.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{execute, CommandKind};
use crate::config::{Config, Overrides};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "maskcon", version, about = "Flow-guided seeds and temporal mask consistency for video instance segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON config file; relative input paths resolve against its directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config `out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write colored PNG overlays of every label map.
    #[arg(long, global = true)]
    pub overlay: bool,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Flow-amplified CAMs and seed maps.
    Fcam,
    /// Random-walk seed refinement over boundary maps.
    Affinity,
    /// Flow-boundary loss of boundary maps against flows.
    FboundaryLoss,
    /// Warps predictions between frames along a flow.
    Warp,
    /// Combines predictions and pseudo-labels across frame pairs.
    Maskconsist,
    /// Links per-frame predictions into tracks.
    Track,
    /// AP50, mAP, AP75, AR1, AR10 and TC against ground truth.
    Metrics,
    /// Renders a synthetic dataset with corrupted pseudo-labels.
    Synth,
    /// Seeds, mask consistency and evaluation end to end.
    Pipeline,
}

impl From<Command> for CommandKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Fcam => CommandKind::Fcam,
            Command::Affinity => CommandKind::Affinity,
            Command::FboundaryLoss => CommandKind::FboundaryLoss,
            Command::Warp => CommandKind::Warp,
            Command::Maskconsist => CommandKind::Maskconsist,
            Command::Track => CommandKind::Track,
            Command::Metrics => CommandKind::Metrics,
            Command::Synth => CommandKind::Synth,
            Command::Pipeline => CommandKind::Pipeline,
        }
    }
}

/// Loads the config, runs the command on a pool of the requested size and
/// writes the output tree. Returns the output directory.
pub fn run(cli: &Cli) -> Result<PathBuf> {
    let g = &cli.global;
    let path = g.config.as_ref().ok_or_else(|| CliError::input("--config is required"))?;
    let overrides = Overrides {
        seed: g.seed,
        out: g.out.clone(),
        overlay: g.overlay,
        jobs: g.jobs,
    };
    let cfg = Config::load(path, &overrides)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::config(format!("cannot start {} worker threads: {e}", cfg.jobs)))?;
    let tree = pool.install(|| execute(cli.command.into(), &cfg))?;
    tree.write_to(&cfg.out)?;
    Ok(cfg.out.clone())
}
