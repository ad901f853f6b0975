use maskcon_core::warp::{warp_prediction, WarpDirection};
use rayon::prelude::*;
use serde::Serialize;

use super::sampling;
use crate::config::Config;
use crate::error::{CliError, Result};
use crate::formats::{encode_jsonl, PredictionRecord};
use crate::io::{load_flo, load_predictions, require, OutputTree};

#[derive(Debug, Serialize)]
struct WarpReport {
    input: usize,
    warped: usize,
    vanished: usize,
}

/// Warps every prediction with one flow field and moves it `frame_gap`
/// frames along the warp direction. Predictions that vanish are dropped.
pub fn cmd_warp(cfg: &Config) -> Result<OutputTree> {
    let flow = load_flo(cfg, require(&cfg.inputs.flow, "flow")?)?;
    let (w, h) = flow.dims();
    let preds = load_predictions(cfg, require(&cfg.inputs.predictions, "predictions")?, w, h)?;
    let wc = &cfg.warp;
    let field = sampling(cfg, flow, wc.flow_direction, wc.direction)?;
    let target = |frame: usize| -> Result<usize> {
        match wc.direction {
            WarpDirection::TToT2 => Ok(frame + wc.frame_gap),
            WarpDirection::T2ToT => frame
                .checked_sub(wc.frame_gap)
                .ok_or_else(|| CliError::input(format!("frame {frame} has no frame {} before it", wc.frame_gap))),
        }
    };
    let warped = preds
        .par_iter()
        .map(|(p, id)| {
            let frame = target(p.frame())?;
            Ok(warp_prediction(p, &field)?.map(|q| PredictionRecord::from_prediction(&q.with_frame(frame), *id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<PredictionRecord> = warped.into_iter().flatten().collect();
    let mut tree = OutputTree::new();
    tree.add_json(
        "warp.json",
        &WarpReport {
            input: preds.len(),
            warped: records.len(),
            vanished: preds.len() - records.len(),
        },
    );
    tree.add("warped.jsonl", encode_jsonl(&records));
    Ok(tree)
}
