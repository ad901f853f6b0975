use maskcon_core::maskconsist::{consist_sequence, FrameLabels, PairSampling, SequenceOutput, StepReport};
use maskcon_core::prediction::{PredictionSet, Provenance};
use maskcon_core::warp::{FlowDirection, WarpDirection};
use maskcon_core::Error as CoreError;
use serde::Serialize;

use super::{check_count, sampling};
use crate::config::Config;
use crate::error::Result;
use crate::formats::{encode_jsonl, PredictionRecord};
use crate::io::{clip_frames, into_frames, load_all, load_flo, load_predictions, raster_dims, require, OutputTree};

/// Summed counts over every frame pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TransferTotals {
    pub pairs: usize,
    pub expanded: usize,
    pub matched: usize,
    pub candidates: usize,
    pub transferred: usize,
    pub suppressed: usize,
}

impl TransferTotals {
    pub fn of(reports: &[StepReport]) -> Self {
        reports.iter().fold(
            Self {
                pairs: reports.len(),
                ..Default::default()
            },
            |t, r| Self {
                pairs: t.pairs,
                expanded: t.expanded + r.expanded_t + r.expanded_t2,
                matched: t.matched + r.matched,
                candidates: t.candidates + r.candidates_to_t + r.candidates_to_t2,
                transferred: t.transferred + r.transferred_to_t + r.transferred_to_t2,
                suppressed: t.suppressed + r.suppressed_t + r.suppressed_t2,
            },
        )
    }
}

#[derive(Debug, Serialize)]
pub(super) struct TransferReport<'a> {
    pub delta: usize,
    pub totals: TransferTotals,
    pub steps: &'a [StepReport],
}

/// Sampling fields for every pair `(k, k + delta)` from the configured flow files.
pub(super) fn pair_samplings(cfg: &Config, frames: usize, dims: (usize, usize)) -> Result<Vec<PairSampling>> {
    let inputs = &cfg.inputs;
    let delta = cfg.maskconsist.delta;
    let pairs = frames.saturating_sub(delta);
    let (key, backward) = if inputs.pair_flows_backward.is_empty() && delta == 1 {
        ("flows_backward", &inputs.flows_backward)
    } else {
        ("pair_flows_backward", &inputs.pair_flows_backward)
    };
    check_count(key, backward.len(), pairs, false)?;
    check_count("pair_flows_forward", inputs.pair_flows_forward.len(), pairs, true)?;
    let backward = load_all(backward, |p| load_flo(cfg, p))?;
    let forward = load_all(&inputs.pair_flows_forward, |p| load_flo(cfg, p))?;
    backward
        .into_iter()
        .enumerate()
        .map(|(k, back)| {
            for f in std::iter::once(&back).chain(forward.get(k)) {
                if f.dims() != dims {
                    return Err(CoreError::DimensionMismatch { left: dims, right: f.dims() }.into());
                }
            }
            let to_t = match forward.get(k) {
                Some(fwd) => sampling(cfg, fwd.clone(), FlowDirection::TToT2, WarpDirection::T2ToT)?,
                None => sampling(cfg, back.clone(), FlowDirection::T2ToT, WarpDirection::T2ToT)?,
            };
            let to_t2 = sampling(cfg, back, FlowDirection::T2ToT, WarpDirection::TToT2)?;
            Ok(PairSampling::new(to_t2, to_t)?)
        })
        .collect()
}

/// Runs the pair procedure over a clip of per-frame predictions and pseudo-labels.
pub(super) fn run_sequence(
    cfg: &Config,
    predictions: Vec<PredictionSet>,
    pseudo: Vec<PredictionSet>,
    samplings: &[PairSampling],
) -> Result<SequenceOutput> {
    let frames = predictions
        .into_iter()
        .zip(pseudo)
        .map(|(p, q)| FrameLabels::new(p, q))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(consist_sequence(&frames, samplings, &cfg.maskconsist)?)
}

pub(super) fn add_labels(tree: &mut OutputTree, cfg: &Config, labels: &[PredictionSet]) -> Result<()> {
    let records: Vec<PredictionRecord> = labels
        .iter()
        .flat_map(|s| s.iter().map(|p| PredictionRecord::from_prediction(p, None)))
        .collect();
    tree.add("labels.jsonl", encode_jsonl(&records));
    for set in labels {
        tree.add_set("labels", set, cfg.overlay)?;
    }
    Ok(())
}

/// Combined pseudo-labels for every frame plus per-pair transfer counts.
pub fn cmd_maskconsist(cfg: &Config) -> Result<OutputTree> {
    let inputs = &cfg.inputs;
    let pair_flows: Vec<&_> = inputs.pair_flows_backward.iter().chain(&inputs.flows_backward).collect();
    let dims = raster_dims(cfg, &pair_flows)?;
    let preds = load_predictions(cfg, require(&inputs.predictions, "predictions")?, dims.0, dims.1)?;
    let pseudo = load_predictions(cfg, require(&inputs.pseudo_labels, "pseudo_labels")?, dims.0, dims.1)?;
    let flow_count = inputs.pair_flows_backward.len().max(inputs.flows_backward.len());
    let min_frames = if flow_count > 0 { flow_count + cfg.maskconsist.delta } else { 0 };
    let frames = clip_frames(cfg, &[&preds, &pseudo], min_frames);
    let samplings = pair_samplings(cfg, frames, dims)?;
    let out = run_sequence(
        cfg,
        into_frames(&preds, frames, dims, Provenance::Model)?,
        into_frames(&pseudo, frames, dims, Provenance::FlowIrn)?,
        &samplings,
    )?;

    let mut tree = OutputTree::new();
    add_labels(&mut tree, cfg, &out.labels)?;
    tree.add_json(
        "report.json",
        &TransferReport {
            delta: cfg.maskconsist.delta,
            totals: TransferTotals::of(&out.reports),
            steps: &out.reports,
        },
    );
    Ok(tree)
}
