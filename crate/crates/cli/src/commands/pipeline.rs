use maskcon_core::eval::{ap_frame, greedy_track, temporal_consistency, Track};
use maskcon_core::maskconsist::PairSampling;
use maskcon_core::prediction::{Prediction, PredictionSet, Provenance};
use maskcon_core::synth::{score_recovery, RecoveryScore};
use maskcon_core::warp::SamplingField;
use maskcon_core::Error as CoreError;
use rayon::prelude::*;
use serde::Serialize;

use super::maskconsist::{add_labels, pair_samplings, run_sequence, TransferReport, TransferTotals};
use super::metrics::{evaluate, Evaluated, MetricsReport};
use super::synth::SynthData;
use super::{check_count, consecutive_samplings, seed_frame, tracks_from_ids, SeedFrame};
use crate::config::{Config, Source, SynthPredictions};
use crate::error::{CliError, Result};
use crate::io::{clip_frames, into_frames, load_all, load_boundary, load_cam, load_flo, load_predictions, raster_dims, OutputTree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeedSummary {
    /// Seed regions over all frames.
    pub regions: usize,
    /// Displacement-grouped instances over all frames, when grouping ran.
    pub instances: Option<usize>,
    /// Frame AP50 of the seed instances against ground truth, when available.
    pub ap50: Option<f64>,
}

/// Machine-readable outcome of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineSummary {
    pub source: Source,
    pub frames: usize,
    pub seeds: Option<SeedSummary>,
    pub maskconsist: TransferTotals,
    /// Synthetic runs only: how many corrupted object-frames were repaired.
    pub recovery: Option<RecoveryScore>,
    /// Metrics of the final labels, when ground truth is available.
    pub metrics: Option<MetricsReport>,
    /// TC of the pseudo-labels before and after the pair procedure.
    pub input_tc: Option<f64>,
    pub output_tc: Option<f64>,
}

struct Stages {
    frames: usize,
    seeds: Vec<SeedFrame>,
    predictions: Vec<PredictionSet>,
    pseudo: Vec<PredictionSet>,
    pair_samplings: Vec<PairSampling>,
    samplings: Vec<SamplingField>,
    ground_truth: Option<(Vec<PredictionSet>, Vec<Track>)>,
    /// Ground-truth object ids and corruption manifest for recovery scoring.
    synth: Option<SynthData>,
}

/// Seed instances as predictions: grouped instances when available, else seed regions.
fn seed_sets(seeds: &[SeedFrame]) -> Result<Vec<PredictionSet>> {
    seeds
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let map = s.instances.as_ref().unwrap_or(&s.seeds);
            Ok(map.to_predictions(k, 1.0, Provenance::FlowIrn)?)
        })
        .collect()
}

fn synth_stages(cfg: &Config) -> Result<Stages> {
    let data = SynthData::build(cfg)?;
    let n = data.frames();
    let cam_flows = (0..n).map(|k| data.cam_flow(k)).collect::<Result<Vec<_>>>()?;
    let r = &data.rendered;
    let seeds = (0..n)
        .into_par_iter()
        .map(|k| seed_frame(cfg, k, &r.frames[k].cams, Some(&cam_flows[k]), None, Some(&r.frames[k].displacement)))
        .collect::<Result<Vec<_>>>()?;
    let gt = r.ground_truth();
    let predictions = match cfg.synth.predictions {
        SynthPredictions::GroundTruth => gt.clone(),
        SynthPredictions::Seeds => seed_sets(&seeds)?,
    };
    let delta = cfg.maskconsist.delta;
    let pair_samplings = (0..n.saturating_sub(delta))
        .map(|k| data.scene.pair_sampling(k, k + delta))
        .collect::<Result<Vec<_>, _>>()?;
    let samplings = (0..n.saturating_sub(1))
        .map(|k| data.scene.forward_sampling(k))
        .collect::<Result<Vec<_>, _>>()?;
    let with_ids: Vec<(Prediction, Option<u64>)> = gt
        .iter()
        .zip(r.object_ids())
        .flat_map(|(s, ids)| s.iter().cloned().zip(ids.into_iter().map(|o| Some(o as u64))).collect::<Vec<_>>())
        .collect();
    let gt_tracks = tracks_from_ids(&with_ids).transpose()?.unwrap_or_default();
    Ok(Stages {
        frames: n,
        seeds,
        predictions,
        pseudo: data.corrupted.labels.clone(),
        pair_samplings,
        samplings,
        ground_truth: Some((gt, gt_tracks)),
        synth: Some(data),
    })
}

fn input_stages(cfg: &Config) -> Result<Stages> {
    let inputs = &cfg.inputs;
    let rasters: Vec<&_> = inputs
        .pair_flows_backward
        .iter()
        .chain(&inputs.flows_backward)
        .chain(&inputs.cam_flows)
        .collect();
    let dims = raster_dims(cfg, &rasters)?;
    let preds_path = inputs
        .predictions
        .as_ref()
        .ok_or_else(|| CliError::input("inputs.predictions is required when pipeline.source is \"inputs\""))?;
    let preds = load_predictions(cfg, preds_path, dims.0, dims.1)?;
    let pseudo = inputs
        .pseudo_labels
        .as_ref()
        .map(|p| load_predictions(cfg, p, dims.0, dims.1))
        .transpose()?;
    let gt = inputs
        .ground_truth
        .as_ref()
        .map(|p| load_predictions(cfg, p, dims.0, dims.1))
        .transpose()?;

    let n_cams = inputs.cams.len();
    if n_cams == 0 && pseudo.is_none() {
        return Err(CliError::input("supply inputs.pseudo_labels or inputs.cams to derive them"));
    }
    let pair_count = inputs.pair_flows_backward.len().max(if cfg.maskconsist.delta == 1 { inputs.flows_backward.len() } else { 0 });
    let min_frames = [
        n_cams,
        if inputs.flows_backward.is_empty() { 0 } else { inputs.flows_backward.len() + 1 },
        if pair_count == 0 { 0 } else { pair_count + cfg.maskconsist.delta },
    ]
    .into_iter()
    .max()
    .unwrap_or(0);
    let lists: Vec<&[(Prediction, Option<u64>)]> = [Some(&preds), pseudo.as_ref(), gt.as_ref()].into_iter().flatten().map(Vec::as_slice).collect();
    let frames = clip_frames(cfg, &lists, min_frames);
    if n_cams > 0 && n_cams != frames {
        return Err(CliError::input(format!("inputs.cams lists {n_cams} files for a {frames}-frame clip")));
    }

    check_count("cam_flows", inputs.cam_flows.len(), n_cams, false)?;
    check_count("boundaries", inputs.boundaries.len(), n_cams, true)?;
    check_count("displacements", inputs.displacements.len(), n_cams, true)?;
    let cams = load_all(&inputs.cams, |p| load_cam(cfg, p))?;
    let cam_flows = load_all(&inputs.cam_flows, |p| load_flo(cfg, p))?;
    let bounds = load_all(&inputs.boundaries, |p| load_boundary(cfg, p))?;
    let disps = load_all(&inputs.displacements, |p| load_flo(cfg, p))?;
    let pair_samplings = pair_samplings(cfg, frames, dims)?;
    let samplings = consecutive_samplings(cfg, frames, dims)?;

    let seeds = (0..n_cams)
        .into_par_iter()
        .map(|k| seed_frame(cfg, k, &cams[k], Some(&cam_flows[k]), bounds.get(k), disps.get(k)))
        .collect::<Result<Vec<_>>>()?;
    if let Some(s) = seeds.iter().find(|s| s.seeds.dims() != dims) {
        return Err(CoreError::DimensionMismatch { left: dims, right: s.seeds.dims() }.into());
    }
    let pseudo = match &pseudo {
        Some(list) => into_frames(list, frames, dims, Provenance::FlowIrn)?,
        None => seed_sets(&seeds)?,
    };
    let ground_truth = match &gt {
        Some(list) => {
            let sets = into_frames(list, frames, dims, Provenance::Model)?;
            let tracks = match tracks_from_ids(list) {
                Some(t) => t?,
                None => greedy_track(&sets, &samplings, &cfg.tracker)?,
            };
            Some((sets, tracks))
        }
        None => None,
    };
    Ok(Stages {
        frames,
        seeds,
        predictions: into_frames(&preds, frames, dims, Provenance::Model)?,
        pseudo,
        pair_samplings,
        samplings,
        ground_truth,
        synth: None,
    })
}

fn tc(sets: &[PredictionSet], samplings: &[SamplingField]) -> Result<Option<f64>> {
    if sets.len() < 2 {
        return Ok(None);
    }
    Ok(Some(temporal_consistency(sets, samplings)?))
}

/// End to end: synthetic scene or input files, then seeds, the pair
/// procedure, metrics and a summary.
pub fn cmd_pipeline(cfg: &Config) -> Result<OutputTree> {
    let s = match cfg.pipeline.source {
        Source::Synth => synth_stages(cfg)?,
        Source::Inputs => input_stages(cfg)?,
    };
    let input_tc = tc(&s.pseudo, &s.samplings)?;
    let out = run_sequence(cfg, s.predictions, s.pseudo, &s.pair_samplings)?;
    let output_tc = tc(&out.labels, &s.samplings)?;

    let metrics = match &s.ground_truth {
        Some((gt_sets, gt_tracks)) if gt_sets.iter().any(|g| !g.is_empty()) => {
            let tracks = greedy_track(&out.labels, &s.samplings, &cfg.tracker)?;
            Some(evaluate(
                cfg,
                Evaluated {
                    sets: &out.labels,
                    tracks,
                },
                Evaluated {
                    sets: gt_sets,
                    tracks: gt_tracks.clone(),
                },
                &s.samplings,
            )?)
        }
        _ => None,
    };
    let recovery = match &s.synth {
        Some(d) => Some(score_recovery(
            &d.rendered.ground_truth(),
            &d.rendered.object_ids(),
            &d.corrupted.manifest,
            &out.labels,
            cfg.synth.recovery_iou,
        )?),
        None => None,
    };
    let seeds = if s.seeds.is_empty() {
        None
    } else {
        let ap50 = match &s.ground_truth {
            Some((gt_sets, _)) if gt_sets.iter().any(|g| !g.is_empty()) => Some(ap_frame(&seed_sets(&s.seeds)?, gt_sets, 0.5)?),
            _ => None,
        };
        Some(SeedSummary {
            regions: s.seeds.iter().map(|f| f.stats.seed_regions).sum(),
            instances: s.seeds.iter().map(|f| f.stats.instances).sum(),
            ap50,
        })
    };
    let totals = TransferTotals::of(&out.reports);
    let summary = PipelineSummary {
        source: cfg.pipeline.source,
        frames: s.frames,
        seeds,
        maskconsist: totals,
        recovery,
        metrics,
        input_tc,
        output_tc,
    };

    let mut tree = OutputTree::new();
    for (k, f) in s.seeds.iter().enumerate() {
        tree.add_label_map("seeds", k, &f.seeds, cfg.overlay)?;
        if let Some(inst) = &f.instances {
            tree.add_label_map("instances", k, inst, cfg.overlay)?;
        }
    }
    add_labels(&mut tree, cfg, &out.labels)?;
    tree.add_json(
        "report.json",
        &TransferReport {
            delta: cfg.maskconsist.delta,
            totals,
            steps: &out.reports,
        },
    );
    if let Some(m) = &summary.metrics {
        tree.add_json("metrics.json", m);
    }
    tree.add_json("summary.json", &summary);
    Ok(tree)
}
