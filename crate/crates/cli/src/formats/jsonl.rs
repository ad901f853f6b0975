use maskcon_core::mask::bbox_of_mask;
use maskcon_core::prediction::{CategoryId, Prediction, PredictionSet, Provenance};
use maskcon_core::rle::{rle_decode, rle_encode};
use serde::{Deserialize, Serialize};

use super::json_error;
use crate::error::FormatError;

/// One prediction per line. `instance` optionally names the track an
/// instance belongs to across frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub frame: usize,
    pub category: u32,
    pub score: f64,
    pub bbox: [u32; 4],
    pub rle: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<u64>,
}

impl PredictionRecord {
    pub fn from_prediction(p: &Prediction, instance: Option<u64>) -> Self {
        Self {
            frame: p.frame(),
            category: p.category().0,
            score: p.score(),
            bbox: p.bbox().to_array(),
            rle: rle_encode(p.mask()),
            instance,
        }
    }
}

pub fn encode_jsonl<'a>(records: impl IntoIterator<Item = &'a PredictionRecord>) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("records serialize");
        out.push(b'\n');
    }
    out
}

/// Parses and validates every line against a `width x height` raster. Blank
/// lines are skipped.
pub fn decode_jsonl(bytes: &[u8], width: usize, height: usize) -> Result<Vec<(Prediction, Option<u64>)>, FormatError> {
    let mut out = Vec::new();
    let mut start = 0;
    for line in bytes.split_inclusive(|&b| b == b'\n') {
        let at = start;
        start += line.len();
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let r: PredictionRecord = serde_json::from_slice(line).map_err(|e| json_error(line, at, &e))?;
        let bad = |msg: String| FormatError::new(at, msg);
        if r.category == 0 {
            return Err(bad("category 0 is background".into()));
        }
        let mask = rle_decode(&r.rle, width, height).map_err(|e| bad(format!("rle: {e}")))?;
        let bbox = bbox_of_mask(&mask).map_err(|e| bad(format!("rle: {e}")))?;
        if bbox.to_array() != r.bbox {
            return Err(bad(format!("bbox {:?} does not match the mask's box {:?}", r.bbox, bbox.to_array())));
        }
        let p = Prediction::new(mask, CategoryId(r.category), r.score, r.frame).map_err(|e| bad(e.to_string()))?;
        out.push((p, r.instance));
    }
    Ok(out)
}

/// Sorts predictions into `frames` per-frame sets, keeping file order within a frame.
pub fn group_by_frame(
    preds: Vec<Prediction>,
    frames: usize,
    width: usize,
    height: usize,
    provenance: Provenance,
) -> Result<Vec<PredictionSet>, String> {
    let mut sets: Vec<PredictionSet> = (0..frames)
        .map(|f| PredictionSet::empty(f, width, height, provenance))
        .collect();
    for p in preds {
        let f = p.frame();
        let set = sets
            .get_mut(f)
            .ok_or_else(|| format!("prediction on frame {f}, but the clip has {frames} frames"))?;
        set.push(p).map_err(|e| e.to_string())?;
    }
    Ok(sets)
}
