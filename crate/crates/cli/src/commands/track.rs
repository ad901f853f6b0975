use maskcon_core::eval::greedy_track;
use maskcon_core::prediction::{Prediction, Provenance};
use serde::Serialize;

use super::consecutive_samplings;
use crate::config::Config;
use crate::error::Result;
use crate::formats::{encode_jsonl, PredictionRecord};
use crate::io::{clip_frames, into_frames, load_predictions, raster_dims, require, OutputTree};

#[derive(Debug, Serialize)]
struct TrackSummary {
    instance: u64,
    category: u32,
    score: f64,
    first_frame: usize,
    last_frame: usize,
    length: usize,
}

/// Links per-frame predictions into tracks. Every output line carries its
/// track id in `instance` and the track's mean score.
pub fn cmd_track(cfg: &Config) -> Result<OutputTree> {
    let inputs = &cfg.inputs;
    let dims = raster_dims(cfg, &inputs.flows_backward.iter().collect::<Vec<_>>())?;
    let preds = load_predictions(cfg, require(&inputs.predictions, "predictions")?, dims.0, dims.1)?;
    let min_frames = if inputs.flows_backward.is_empty() { 0 } else { inputs.flows_backward.len() + 1 };
    let frames = clip_frames(cfg, &[&preds], min_frames);
    let samplings = consecutive_samplings(cfg, frames, dims)?;
    let sets = into_frames(&preds, frames, dims, Provenance::Model)?;
    let tracks = greedy_track(&sets, &samplings, &cfg.tracker)?;

    let mut records = Vec::new();
    let mut summary = Vec::with_capacity(tracks.len());
    for (id, t) in tracks.iter().enumerate() {
        let id = id as u64;
        for (&frame, mask) in t.masks() {
            let p = Prediction::new(mask.clone(), t.category(), t.score(), frame)?;
            records.push(PredictionRecord::from_prediction(&p, Some(id)));
        }
        summary.push(TrackSummary {
            instance: id,
            category: t.category().0,
            score: t.score(),
            first_frame: *t.masks().keys().next().expect("tracks are non-empty"),
            last_frame: *t.masks().keys().next_back().expect("tracks are non-empty"),
            length: t.masks().len(),
        });
    }
    records.sort_by_key(|r| (r.frame, r.instance));
    let mut tree = OutputTree::new();
    tree.add("tracks.jsonl", encode_jsonl(&records));
    tree.add_json("tracks.json", &summary);
    Ok(tree)
}
