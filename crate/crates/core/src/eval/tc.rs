use rayon::prelude::*;

use super::ap::ap_frame;
use crate::error::{ensure_same_dims, Error, Result};
use crate::prediction::{PredictionSet, Provenance};
use crate::warp::{warp_prediction, SamplingField, WarpDirection};

/// AP50 of frame `k + 1` predictions against the warped frame-`k`
/// predictions, for one consecutive pair. With nothing to warp the pair
/// scores 1 when frame `k + 1` is empty as well, 0 otherwise.
pub fn pair_consistency(prev: &PredictionSet, next: &PredictionSet, sampling: &SamplingField) -> Result<f64> {
    ensure_same_dims(prev.dims(), next.dims())?;
    ensure_same_dims(prev.dims(), sampling.dims())?;
    if sampling.direction() != WarpDirection::TToT2 {
        return Err(Error::invalid("sampling field", "consistency warps forward in time"));
    }
    let (w, h) = next.dims();
    let mut reference = PredictionSet::empty(next.frame(), w, h, Provenance::Transferred);
    for p in prev {
        if let Some(warped) = warp_prediction(p, sampling)? {
            reference.push(warped.with_frame(next.frame()))?;
        }
    }
    if reference.is_empty() {
        return Ok(if next.is_empty() { 1.0 } else { 0.0 });
    }
    ap_frame(std::slice::from_ref(next), std::slice::from_ref(&reference), 0.5)
}

/// Mean pair consistency over consecutive frames. `samplings[k]` warps
/// frame `k` onto frame `k + 1`.
pub fn temporal_consistency(per_frame: &[PredictionSet], samplings: &[SamplingField]) -> Result<f64> {
    if per_frame.len() < 2 {
        return Err(Error::invalid("frames", format!("need at least 2, got {}", per_frame.len())));
    }
    if samplings.len() + 1 != per_frame.len() {
        return Err(Error::invalid(
            "sampling fields",
            format!("{} frames need {} fields, got {}", per_frame.len(), per_frame.len() - 1, samplings.len()),
        ));
    }
    let scores = per_frame
        .par_windows(2)
        .zip(samplings.par_iter())
        .map(|(pair, s)| pair_consistency(&pair[0], &pair[1], s))
        .collect::<Result<Vec<_>>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
