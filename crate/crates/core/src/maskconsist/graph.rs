use std::collections::BTreeMap;

use rayon::prelude::*;

use super::EdgeOverlap;
use crate::assignment::max_weight_assignment;
use crate::error::{ensure_same_dims, Error, Result};
use crate::mask::{box_iou, mask_iou};
use crate::prediction::PredictionSet;
use crate::warp::{warp_prediction, SamplingField};

/// Bipartite graph between two frames' candidates. Only same-category pairs
/// with positive overlap carry an edge.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchGraph {
    left_len: usize,
    right_len: usize,
    weights: BTreeMap<(usize, usize), f64>,
}

impl MatchGraph {
    pub fn from_weights(
        left_len: usize,
        right_len: usize,
        weights: BTreeMap<(usize, usize), f64>,
    ) -> Result<Self> {
        for (&(i, j), &w) in &weights {
            if i >= left_len || j >= right_len {
                return Err(Error::invalid(
                    "edge",
                    format!("({i}, {j}) outside a {left_len}x{right_len} graph"),
                ));
            }
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::invalid("edge weight", format!("{w} outside [0, 1]")));
            }
        }
        Ok(Self {
            left_len,
            right_len,
            weights,
        })
    }

    pub fn left_len(&self) -> usize {
        self.left_len
    }

    pub fn right_len(&self) -> usize {
        self.right_len
    }

    pub fn weights(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.weights.get(&(i, j)).copied()
    }
}

/// Edge weight `1[c_i = c_j] * overlap(W(p_i), p_j)` where `W` warps left
/// predictions onto the right frame's grid.
pub fn build_match_graph(
    left: &PredictionSet,
    right: &PredictionSet,
    sampling: &SamplingField,
    overlap: EdgeOverlap,
) -> Result<MatchGraph> {
    ensure_same_dims(left.dims(), right.dims())?;
    ensure_same_dims(left.dims(), sampling.dims())?;
    let warped = left
        .predictions()
        .par_iter()
        .map(|p| warp_prediction(p, sampling))
        .collect::<Result<Vec<_>>>()?;
    let mut weights = BTreeMap::new();
    for (i, w) in warped.iter().enumerate() {
        let Some(w) = w else { continue };
        for (j, r) in right.iter().enumerate() {
            if w.category() != r.category() {
                continue;
            }
            let e = match overlap {
                EdgeOverlap::Mask => mask_iou(w.mask(), r.mask())?,
                EdgeOverlap::Box => box_iou(&w.bbox(), &r.bbox()),
            };
            if e > 0.0 {
                weights.insert((i, j), e);
            }
        }
    }
    MatchGraph::from_weights(left.len(), right.len(), weights)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    pub left: usize,
    pub right: usize,
    pub weight: f64,
}

/// One-to-one matching, sorted by left index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchSet {
    pairs: Vec<MatchPair>,
}

impl MatchSet {
    pub fn pairs(&self) -> &[MatchPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Sum of matched weights, accumulated in left-index order.
    pub fn total_weight(&self) -> f64 {
        self.pairs.iter().map(|p| p.weight).sum()
    }

    /// The same matching seen from the right-hand frame.
    pub fn reversed(&self) -> MatchSet {
        let mut pairs: Vec<MatchPair> = self
            .pairs
            .iter()
            .map(|p| MatchPair {
                left: p.right,
                right: p.left,
                weight: p.weight,
            })
            .collect();
        pairs.sort_by_key(|p| p.left);
        MatchSet { pairs }
    }
}

/// Maximum-weight one-to-one matching over the graph's edges; pairs without
/// a positive edge are left out.
pub fn hungarian_match(g: &MatchGraph) -> MatchSet {
    let mut matrix = vec![vec![0.0; g.right_len]; g.left_len];
    for (&(i, j), &w) in &g.weights {
        matrix[i][j] = w;
    }
    let pairs = max_weight_assignment(&matrix)
        .into_iter()
        .enumerate()
        .filter_map(|(i, j)| {
            let j = j?;
            let weight = g.weight(i, j).filter(|&w| w > 0.0)?;
            Some(MatchPair {
                left: i,
                right: j,
                weight,
            })
        })
        .collect();
    MatchSet { pairs }
}
