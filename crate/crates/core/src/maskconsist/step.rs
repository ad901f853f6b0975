use rayon::prelude::*;
use serde::Serialize;

use super::combine::iom_nms;
use super::{
    build_match_graph, expand_predictions, hungarian_match, transfer_labels, MaskConsistConfig,
    Propagation,
};
use crate::error::{ensure_same_dims, Error, Result};
use crate::prediction::{Prediction, PredictionSet, Provenance};
use crate::warp::{SamplingField, WarpDirection};

/// Model predictions and current pseudo-labels for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLabels {
    pub predictions: PredictionSet,
    pub pseudo: PredictionSet,
}

impl FrameLabels {
    pub fn new(predictions: PredictionSet, pseudo: PredictionSet) -> Result<Self> {
        if predictions.frame() != pseudo.frame() {
            return Err(Error::FrameMismatch(predictions.frame(), pseudo.frame()));
        }
        ensure_same_dims(predictions.dims(), pseudo.dims())?;
        Ok(Self {
            predictions,
            pseudo,
        })
    }

    pub fn frame(&self) -> usize {
        self.predictions.frame()
    }
}

/// Sampling fields for both warp directions of a frame pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSampling {
    t_to_t2: SamplingField,
    t2_to_t: SamplingField,
}

impl PairSampling {
    pub fn new(t_to_t2: SamplingField, t2_to_t: SamplingField) -> Result<Self> {
        for (field, want) in [(&t_to_t2, WarpDirection::TToT2), (&t2_to_t, WarpDirection::T2ToT)] {
            if field.direction() != want {
                return Err(Error::invalid(
                    "sampling field",
                    format!("expected a {want:?} field, got {:?}", field.direction()),
                ));
            }
        }
        ensure_same_dims(t_to_t2.dims(), t2_to_t.dims())?;
        Ok(Self { t_to_t2, t2_to_t })
    }

    pub fn identity(width: usize, height: usize) -> Result<Self> {
        Self::new(
            SamplingField::identity(width, height, WarpDirection::TToT2)?,
            SamplingField::identity(width, height, WarpDirection::T2ToT)?,
        )
    }

    pub fn t_to_t2(&self) -> &SamplingField {
        &self.t_to_t2
    }

    pub fn t2_to_t(&self) -> &SamplingField {
        &self.t2_to_t
    }
}

/// Counts for one frame pair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StepReport {
    pub frame_t: usize,
    pub frame_t2: usize,
    /// Merged candidates added by expansion on each frame.
    pub expanded_t: usize,
    pub expanded_t2: usize,
    pub matched: usize,
    /// Labels emitted by the transfer, before suppression.
    pub candidates_to_t: usize,
    pub candidates_to_t2: usize,
    /// Transferred labels that survived suppression.
    pub transferred_to_t: usize,
    pub transferred_to_t2: usize,
    pub suppressed_t: usize,
    pub suppressed_t2: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub labels_t: PredictionSet,
    pub labels_t2: PredictionSet,
    pub report: StepReport,
}

struct Transfers {
    to_t: PredictionSet,
    to_t2: PredictionSet,
    report: StepReport,
}

fn transfer_pair(
    t: &FrameLabels,
    t2: &FrameLabels,
    sampling: &PairSampling,
    cfg: &MaskConsistConfig,
) -> Result<Transfers> {
    ensure_same_dims(t.predictions.dims(), t2.predictions.dims())?;
    ensure_same_dims(t.predictions.dims(), sampling.t_to_t2.dims())?;
    let exp_t = expand_predictions(&t.predictions, &t.pseudo, cfg)?;
    let exp_t2 = expand_predictions(&t2.predictions, &t2.pseudo, cfg)?;
    let graph = build_match_graph(&exp_t, &exp_t2, &sampling.t_to_t2, cfg.edge_overlap)?;
    let matches = hungarian_match(&graph);
    let to_t2 = transfer_labels(&matches, &exp_t, &exp_t2, &t.pseudo, &sampling.t_to_t2, cfg)?;
    let to_t = transfer_labels(
        &matches.reversed(),
        &exp_t2,
        &exp_t,
        &t2.pseudo,
        &sampling.t2_to_t,
        cfg,
    )?;
    let top = |p: &PredictionSet| p.len().min(cfg.top_k);
    let report = StepReport {
        frame_t: t.frame(),
        frame_t2: t2.frame(),
        expanded_t: exp_t.len() - top(&t.predictions),
        expanded_t2: exp_t2.len() - top(&t2.predictions),
        matched: matches.len(),
        candidates_to_t: to_t.len(),
        candidates_to_t2: to_t2.len(),
        ..Default::default()
    };
    Ok(Transfers {
        to_t,
        to_t2,
        report,
    })
}

/// Combines and returns `(labels, surviving transfers, suppressed count)`.
fn combine_counted(
    transferred: &[Prediction],
    pseudo: &PredictionSet,
    cfg: &MaskConsistConfig,
) -> Result<(PredictionSet, usize, usize)> {
    let all: Vec<&Prediction> = pseudo.iter().chain(transferred).collect();
    let keep = iom_nms(&all, cfg.iom_threshold)?;
    let kept_transfers = keep[pseudo.len()..].iter().filter(|&&k| k).count();
    let suppressed = keep.iter().filter(|&&k| !k).count();
    let (w, h) = pseudo.dims();
    let labels = all
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(p, _)| p.clone().with_frame(pseudo.frame()))
        .collect();
    let set = PredictionSet::new(pseudo.frame(), w, h, Provenance::Combined, labels)?;
    Ok((set, kept_transfers, suppressed))
}

/// One symmetric pass over a frame pair: expand both frames, match once,
/// transfer in both directions and combine each side with its own
/// pseudo-labels.
pub fn maskconsist_step(
    t: &FrameLabels,
    t2: &FrameLabels,
    sampling: &PairSampling,
    cfg: &MaskConsistConfig,
) -> Result<StepOutput> {
    cfg.validate()?;
    let Transfers {
        to_t,
        to_t2,
        mut report,
    } = transfer_pair(t, t2, sampling, cfg)?;
    let (labels_t, kept_t, supp_t) = combine_counted(to_t.predictions(), &t.pseudo, cfg)?;
    let (labels_t2, kept_t2, supp_t2) = combine_counted(to_t2.predictions(), &t2.pseudo, cfg)?;
    report.transferred_to_t = kept_t;
    report.transferred_to_t2 = kept_t2;
    report.suppressed_t = supp_t;
    report.suppressed_t2 = supp_t2;
    Ok(StepOutput {
        labels_t,
        labels_t2,
        report,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceOutput {
    /// Final labels per frame.
    pub labels: Vec<PredictionSet>,
    /// One report per frame pair `(k, k + delta)`, in order of `k`.
    pub reports: Vec<StepReport>,
}

/// Runs every frame pair `(k, k + delta)` of a clip.
///
/// `samplings[k]` belongs to the pair starting at frame `k`. Frames are
/// expected in temporal order with consecutive frame indices.
pub fn consist_sequence(
    frames: &[FrameLabels],
    samplings: &[PairSampling],
    cfg: &MaskConsistConfig,
) -> Result<SequenceOutput> {
    cfg.validate()?;
    let n = frames.len();
    let delta = cfg.delta;
    let pairs = n.saturating_sub(delta);
    if samplings.len() != pairs {
        return Err(Error::invalid(
            "sampling fields",
            format!("{n} frames at gap {delta} need {pairs} pairs, got {}", samplings.len()),
        ));
    }
    match cfg.propagation {
        Propagation::Chained => {
            let mut current: Vec<PredictionSet> = frames
                .iter()
                .map(|f| f.pseudo.clone().with_provenance(Provenance::Combined))
                .collect();
            let mut reports = Vec::with_capacity(pairs);
            for k in 0..pairs {
                let t = FrameLabels::new(frames[k].predictions.clone(), current[k].clone())?;
                let t2 = FrameLabels::new(
                    frames[k + delta].predictions.clone(),
                    current[k + delta].clone(),
                )?;
                let out = maskconsist_step(&t, &t2, &samplings[k], cfg)?;
                current[k] = out.labels_t;
                current[k + delta] = out.labels_t2;
                reports.push(out.report);
            }
            Ok(SequenceOutput {
                labels: current,
                reports,
            })
        }
        Propagation::Independent => {
            let transfers = (0..pairs)
                .into_par_iter()
                .map(|k| transfer_pair(&frames[k], &frames[k + delta], &samplings[k], cfg))
                .collect::<Result<Vec<_>>>()?;
            let mut incoming: Vec<Vec<Prediction>> = vec![Vec::new(); n];
            for (k, tr) in transfers.iter().enumerate() {
                incoming[k].extend(tr.to_t.iter().cloned());
                incoming[k + delta].extend(tr.to_t2.iter().cloned());
            }
            let labels = frames
                .iter()
                .zip(&incoming)
                .map(|(f, extra)| combine_counted(extra, &f.pseudo, cfg).map(|(set, _, _)| set))
                .collect::<Result<Vec<_>>>()?;
            let reports = transfers.into_iter().map(|t| t.report).collect();
            Ok(SequenceOutput { labels, reports })
        }
    }
}
