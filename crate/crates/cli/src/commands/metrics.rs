use maskcon_core::eval::{ap_frame, greedy_track, temporal_consistency, video_ap, Track, VideoEval};
use maskcon_core::prediction::{PredictionSet, Provenance};
use maskcon_core::warp::SamplingField;
use serde::{Deserialize, Serialize};

use super::{consecutive_samplings, tracks_from_ids};
use crate::config::Config;
use crate::error::Result;
use crate::io::{clip_frames, into_frames, load_predictions, raster_dims, require, OutputTree};

/// The fixed metric report.
///
/// `AP50` is frame-level AP at mask IoU 0.5. `mAP`, `AP75`, `AR1` and `AR10`
/// are video-level over tracks, with mAP averaged over the configured
/// thresholds. `TC` is the mean AP between each frame's predictions and the
/// previous frame's predictions warped forward; it is null for clips shorter
/// than two frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "AP50")]
    pub ap50: f64,
    #[serde(rename = "mAP")]
    pub map: f64,
    #[serde(rename = "AP75")]
    pub ap75: f64,
    #[serde(rename = "AR1")]
    pub ar1: f64,
    #[serde(rename = "AR10")]
    pub ar10: f64,
    #[serde(rename = "TC")]
    pub tc: Option<f64>,
}

pub(super) struct Evaluated<'a> {
    pub sets: &'a [PredictionSet],
    pub tracks: Vec<Track>,
}

pub(super) fn evaluate(
    cfg: &Config,
    preds: Evaluated<'_>,
    gt: Evaluated<'_>,
    samplings: &[SamplingField],
) -> Result<MetricsReport> {
    let ap50 = ap_frame(preds.sets, gt.sets, 0.5)?;
    let video = VideoEval {
        predictions: preds.tracks,
        ground_truth: gt.tracks,
    };
    let v = video_ap(&[video], &cfg.metrics.thresholds)?;
    let tc = if preds.sets.len() >= 2 {
        Some(temporal_consistency(preds.sets, samplings)?)
    } else {
        None
    };
    Ok(MetricsReport {
        ap50,
        map: v.map,
        ap75: v.ap75,
        ar1: v.ar1,
        ar10: v.ar10,
        tc,
    })
}

/// Scores predictions against ground truth. Files whose lines all carry an
/// `instance` id are evaluated with those tracks; otherwise tracks come from
/// the greedy flow-guided tracker.
pub fn cmd_metrics(cfg: &Config) -> Result<OutputTree> {
    let inputs = &cfg.inputs;
    let dims = raster_dims(cfg, &inputs.flows_backward.iter().collect::<Vec<_>>())?;
    let preds = load_predictions(cfg, require(&inputs.predictions, "predictions")?, dims.0, dims.1)?;
    let gt = load_predictions(cfg, require(&inputs.ground_truth, "ground_truth")?, dims.0, dims.1)?;
    let min_frames = if inputs.flows_backward.is_empty() { 1 } else { inputs.flows_backward.len() + 1 };
    let frames = clip_frames(cfg, &[&preds, &gt], min_frames);
    let samplings = consecutive_samplings(cfg, frames, dims)?;
    let pred_sets = into_frames(&preds, frames, dims, Provenance::Model)?;
    let gt_sets = into_frames(&gt, frames, dims, Provenance::Model)?;
    let tracks = |sets: &[PredictionSet], list| -> Result<Vec<Track>> {
        match tracks_from_ids(list) {
            Some(t) => t,
            None => Ok(greedy_track(sets, &samplings, &cfg.tracker)?),
        }
    };
    let report = evaluate(
        cfg,
        Evaluated {
            sets: &pred_sets,
            tracks: tracks(&pred_sets, &preds)?,
        },
        Evaluated {
            sets: &gt_sets,
            tracks: tracks(&gt_sets, &gt)?,
        },
        &samplings,
    )?;
    let mut tree = OutputTree::new();
    tree.add_json("metrics.json", &report);
    Ok(tree)
}
