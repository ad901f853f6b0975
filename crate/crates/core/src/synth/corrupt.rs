use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::prediction::{Prediction, PredictionSet, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionSpec {
    /// Fraction of object-frames whose label is removed.
    pub drop_rate: f64,
    /// Fraction of object-frames whose mask is eroded towards its center.
    pub erode_rate: f64,
    /// Share of the area an eroded mask keeps.
    pub erode_keep: f64,
    pub seed: u64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self {
            drop_rate: 0.0,
            erode_rate: 0.0,
            erode_keep: 0.5,
            seed: 0,
        }
    }
}

impl CorruptionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.drop_rate) {
            return Err(Error::invalid("drop rate", format!("{} outside [0, 1]", self.drop_rate)));
        }
        if !(0.0..1.0).contains(&self.erode_rate) {
            return Err(Error::invalid("erode rate", format!("{} outside [0, 1)", self.erode_rate)));
        }
        if self.drop_rate + self.erode_rate > 1.0 {
            return Err(Error::invalid("corruption rates", "drop and erode rates sum above 1"));
        }
        if !(self.erode_keep > 0.0 && self.erode_keep < 1.0) {
            return Err(Error::invalid("erode keep", format!("{} outside (0, 1)", self.erode_keep)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    Dropped,
    Eroded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub frame: usize,
    pub object: usize,
    pub kind: CorruptionKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedLabels {
    pub labels: Vec<PredictionSet>,
    /// Object index of each remaining label.
    pub object_ids: Vec<Vec<usize>>,
    /// Corrupted object-frames sorted by frame, then object.
    pub manifest: Vec<CorruptionRecord>,
}

/// Keeps the `keep` share of the mask's pixels closest to its centroid
/// (ties in raster order).
fn erode_to_center(mask: &BinaryMask, keep: f64) -> BinaryMask {
    let pixels: Vec<(usize, usize)> = mask.iter_ones().collect();
    let n = pixels.len() as f64;
    let cx = pixels.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let cy = pixels.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let mut order: Vec<(f64, usize)> = pixels
        .iter()
        .enumerate()
        .map(|(k, &(x, y))| ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2), k))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let count = ((keep * n).ceil() as usize).max(1);
    let mut out = BinaryMask::new(mask.width(), mask.height()).expect("mask dims are valid");
    for &(_, k) in order.iter().take(count) {
        let (x, y) = pixels[k];
        out.set(x, y, true);
    }
    out
}

/// Drops or erodes a seeded, exact-count selection of object-frames.
///
/// `object_ids[f][i]` names the object behind `gt[f]`'s `i`-th label. The
/// number of dropped (eroded) object-frames is the rate times the total,
/// rounded to the nearest integer.
pub fn corrupt_labels(gt: &[PredictionSet], object_ids: &[Vec<usize>], c: &CorruptionSpec) -> Result<CorruptedLabels> {
    c.validate()?;
    if gt.len() != object_ids.len() || gt.iter().zip(object_ids).any(|(s, ids)| s.len() != ids.len()) {
        return Err(Error::invalid("object ids", "must name every ground-truth label"));
    }
    let slots: Vec<(usize, usize)> = gt
        .iter()
        .enumerate()
        .flat_map(|(f, s)| (0..s.len()).map(move |i| (f, i)))
        .collect();
    let n = slots.len();
    let n_drop = ((c.drop_rate * n as f64).round() as usize).min(n);
    let n_erode = ((c.erode_rate * n as f64).round() as usize).min(n - n_drop);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let chosen = sample(&mut rng, n, n_drop + n_erode).into_vec();

    let mut kind = vec![None; n];
    for (rank, &slot) in chosen.iter().enumerate() {
        kind[slot] = Some(if rank < n_drop { CorruptionKind::Dropped } else { CorruptionKind::Eroded });
    }

    let mut labels = Vec::with_capacity(gt.len());
    let mut ids_out = Vec::with_capacity(gt.len());
    let mut manifest = Vec::new();
    let mut slot = 0;
    for (set, ids) in gt.iter().zip(object_ids) {
        let (w, h) = set.dims();
        let mut out = PredictionSet::empty(set.frame(), w, h, Provenance::FlowIrn);
        let mut kept_ids = Vec::new();
        for (p, &object) in set.iter().zip(ids) {
            match kind[slot] {
                None => {
                    out.push(p.clone())?;
                    kept_ids.push(object);
                }
                Some(CorruptionKind::Dropped) => {
                    manifest.push(CorruptionRecord {
                        frame: set.frame(),
                        object,
                        kind: CorruptionKind::Dropped,
                    });
                }
                Some(CorruptionKind::Eroded) => {
                    let mask = erode_to_center(p.mask(), c.erode_keep);
                    out.push(Prediction::new(mask, p.category(), p.score(), p.frame())?)?;
                    kept_ids.push(object);
                    manifest.push(CorruptionRecord {
                        frame: set.frame(),
                        object,
                        kind: CorruptionKind::Eroded,
                    });
                }
            }
            slot += 1;
        }
        labels.push(out);
        ids_out.push(kept_ids);
    }
    manifest.sort();
    Ok(CorruptedLabels {
        labels,
        object_ids: ids_out,
        manifest,
    })
}
