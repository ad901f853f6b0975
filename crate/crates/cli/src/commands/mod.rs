//! Subcommands. Each returns the complete output tree; nothing is written
//! until every input has been read and validated.

mod affinity;
mod fcam;
mod loss;
mod maskconsist;
mod metrics;
mod pipeline;
mod synth;
mod track;
mod warp;

use std::collections::BTreeMap;
use std::path::PathBuf;

use maskcon_core::eval::Track;
use maskcon_core::field::{DisplacementField, FlowField};
use maskcon_core::flowirn::{
    amplify_cam, cam_seeds, flow_magnitude_percentile, group_by_displacement, random_walk_refine, BoundaryMap,
    NeighborhoodSpec, ScoreMapStack,
};
use maskcon_core::mask::BinaryMask;
use maskcon_core::prediction::{InstanceLabelMap, Prediction};
use maskcon_core::warp::{flow_to_sampling, FlowDirection, SamplingField, WarpDirection};
use maskcon_core::Error as CoreError;
use serde::Serialize;

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::io::{load_all, load_flo};

pub use affinity::cmd_affinity;
pub use fcam::cmd_fcam;
pub use loss::cmd_fboundary_loss;
pub use maskconsist::cmd_maskconsist;
pub use metrics::{cmd_metrics, MetricsReport};
pub use pipeline::{cmd_pipeline, PipelineSummary};
pub use synth::cmd_synth;
pub use track::cmd_track;
pub use warp::cmd_warp;

/// A list that must be empty or hold exactly one entry per frame.
fn check_count(key: &str, got: usize, want: usize, optional: bool) -> Result<()> {
    if got == want || (optional && got == 0) {
        Ok(())
    } else {
        Err(CliError::input(format!("inputs.{key} lists {got} files, expected {want}")))
    }
}

/// Maps a flow/warp direction conflict to a config error: the directions
/// come from the config, not from the files.
fn sampling(cfg: &Config, flow: FlowField, flow_direction: FlowDirection, warp: WarpDirection) -> Result<SamplingField> {
    flow_to_sampling(&flow, flow_direction, warp, cfg.warp.inversion).map_err(|e| match e {
        CoreError::DirectionMismatch { .. } => CliError::config(format!("{e}; set warp.inversion or supply the opposite flow")),
        other => other.into(),
    })
}

/// Fields warping frame `k` onto frame `k + 1` from `inputs.flows_backward`;
/// zero motion when no flows are given.
fn consecutive_samplings(cfg: &Config, frames: usize, dims: (usize, usize)) -> Result<Vec<SamplingField>> {
    let pairs = frames.saturating_sub(1);
    let paths = &cfg.inputs.flows_backward;
    check_count("flows_backward", paths.len(), pairs, true)?;
    if paths.is_empty() {
        return (0..pairs)
            .map(|_| SamplingField::identity(dims.0, dims.1, WarpDirection::TToT2).map_err(CliError::from))
            .collect();
    }
    let flows = load_all(paths, |p| load_flo(cfg, p))?;
    flows
        .into_iter()
        .map(|f| {
            if f.dims() != dims {
                return Err(CoreError::DimensionMismatch { left: dims, right: f.dims() }.into());
            }
            sampling(cfg, f, FlowDirection::T2ToT, WarpDirection::TToT2)
        })
        .collect()
}

/// Per-frame seed stage shared by `fcam`, `affinity` and `pipeline`.
struct SeedFrame {
    /// Flow-amplified raw CAMs, when a flow was supplied.
    amplified: Option<ScoreMapStack>,
    seeds: InstanceLabelMap,
    instances: Option<InstanceLabelMap>,
    stats: SeedStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct SeedStats {
    frame: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    flow_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    amplified_pixels: Option<usize>,
    seed_regions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    instances: Option<usize>,
}

/// Normalizes the CAMs, amplifies moving pixels, optionally propagates
/// scores with the random walk, thresholds into seeds and optionally groups
/// seeds into instances along the displacement field.
fn seed_frame(
    cfg: &Config,
    frame: usize,
    cams: &ScoreMapStack,
    flow: Option<&FlowField>,
    boundary: Option<&BoundaryMap>,
    displacement: Option<&DisplacementField>,
) -> Result<SeedFrame> {
    let amp = &cfg.cam.amplify;
    let mut scores = cams.normalized();
    let mut amplified = None;
    let (mut flow_threshold, mut amplified_pixels) = (None, None);
    if let Some(flow) = flow {
        amplified = Some(amplify_cam(cams, flow, amp)?);
        scores = amplify_cam(&scores, flow, amp)?;
        let t = flow_magnitude_percentile(flow, amp.percentile)?;
        flow_threshold = Some(t);
        amplified_pixels = Some(flow.magnitudes().iter().filter(|&&m| m > t).count());
    }
    if let Some(b) = boundary {
        let nbhd = NeighborhoodSpec::new(cfg.affinity.radius)?;
        scores = random_walk_refine(&scores, b, &nbhd, &cfg.affinity.random_walk)?;
    }
    let seeds = cam_seeds(&scores, cfg.cam.fg_threshold)?;
    let instances = displacement
        .map(|d| group_by_displacement(d, &seeds, cfg.affinity.max_iters))
        .transpose()?;
    let stats = SeedStats {
        frame,
        flow_threshold,
        amplified_pixels,
        seed_regions: seeds.instance_count(),
        instances: instances.as_ref().map(InstanceLabelMap::instance_count),
    };
    Ok(SeedFrame {
        amplified,
        seeds,
        instances,
        stats,
    })
}

/// Tracks from explicit instance ids, when every prediction carries one.
/// Members of a track share a category and appear at most once per frame;
/// the track score is the mean member score.
fn tracks_from_ids(preds: &[(Prediction, Option<u64>)]) -> Option<Result<Vec<Track>>> {
    if preds.is_empty() || preds.iter().any(|(_, id)| id.is_none()) {
        return None;
    }
    let mut groups: BTreeMap<u64, Vec<&Prediction>> = BTreeMap::new();
    for (p, id) in preds {
        groups.entry(id.expect("checked above")).or_default().push(p);
    }
    let build = |(id, members): (u64, Vec<&Prediction>)| -> Result<Track> {
        let category = members[0].category();
        let mut masks: BTreeMap<usize, BinaryMask> = BTreeMap::new();
        for p in &members {
            if p.category() != category {
                return Err(CliError::input(format!("instance {id} changes category")));
            }
            if masks.insert(p.frame(), p.mask().clone()).is_some() {
                return Err(CliError::input(format!("instance {id} appears twice on frame {}", p.frame())));
            }
        }
        let score = members.iter().map(|p| p.score()).sum::<f64>() / members.len() as f64;
        Ok(Track::new(category, score, masks)?)
    };
    Some(groups.into_iter().map(build).collect())
}

/// Every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Fcam,
    Affinity,
    FboundaryLoss,
    Warp,
    Maskconsist,
    Track,
    Metrics,
    Synth,
    Pipeline,
}

pub fn execute(kind: CommandKind, cfg: &Config) -> Result<crate::io::OutputTree> {
    let mut tree = match kind {
        CommandKind::Fcam => cmd_fcam(cfg),
        CommandKind::Affinity => cmd_affinity(cfg),
        CommandKind::FboundaryLoss => cmd_fboundary_loss(cfg),
        CommandKind::Warp => cmd_warp(cfg),
        CommandKind::Maskconsist => cmd_maskconsist(cfg),
        CommandKind::Track => cmd_track(cfg),
        CommandKind::Metrics => cmd_metrics(cfg),
        CommandKind::Synth => cmd_synth(cfg),
        CommandKind::Pipeline => cmd_pipeline(cfg),
    }?;
    tree.add(PathBuf::from("config.json"), cfg.echo());
    Ok(tree)
}
