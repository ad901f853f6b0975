//! Backward (gather) warping of masks and predictions with bilinear sampling.
//!
//! A sampling field `D` on the *target* grid says where each target pixel
//! reads from in the source frame: `out(q) = sample(src, q + D(q))`. To move
//! frame-`t` content onto frame `t2`, `D` must therefore be the flow from `t2`
//! back to `t`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_dims, Error, Result};
use crate::field::{FlowField, VectorField};
use crate::mask::BinaryMask;
use crate::prediction::Prediction;

/// Default binarization threshold for warped masks.
pub const DEFAULT_MASK_THRESHOLD: f64 = 0.5;

/// Which way an optical flow field was estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowDirection {
    /// Displacements of frame-`t` pixels into frame `t2`.
    TToT2,
    /// Displacements of frame-`t2` pixels back into frame `t`.
    T2ToT,
}

/// Which way content is moved by a warp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpDirection {
    /// Frame-`t` content onto frame `t2`'s grid.
    TToT2,
    /// Frame-`t2` content onto frame `t`'s grid.
    T2ToT,
}

impl WarpDirection {
    /// The flow direction that drives this warp without inversion.
    pub fn required_flow(self) -> FlowDirection {
        match self {
            WarpDirection::TToT2 => FlowDirection::T2ToT,
            WarpDirection::T2ToT => FlowDirection::TToT2,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            WarpDirection::TToT2 => WarpDirection::T2ToT,
            WarpDirection::T2ToT => WarpDirection::TToT2,
        }
    }
}

/// What to do when the supplied flow points the same way as the warp.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowInversion {
    /// Refuse: the caller must supply flow estimated in the opposite direction.
    #[default]
    Strict,
    /// Use the negated flow. Exact for uniform translation, a first-order
    /// approximation otherwise.
    Negate,
}

/// Per-target-pixel sampling offsets for one warp direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingField {
    offsets: VectorField,
    direction: WarpDirection,
}

impl SamplingField {
    pub fn new(offsets: VectorField, direction: WarpDirection) -> Self {
        Self { offsets, direction }
    }

    pub fn identity(width: usize, height: usize, direction: WarpDirection) -> Result<Self> {
        Ok(Self::new(VectorField::zeros(width, height)?, direction))
    }

    pub fn offsets(&self) -> &VectorField {
        &self.offsets
    }

    pub fn direction(&self) -> WarpDirection {
        self.direction
    }

    pub fn dims(&self) -> (usize, usize) {
        self.offsets.dims()
    }
}

/// Packages a flow field as the sampling field for the requested warp.
pub fn flow_to_sampling(
    flow: &FlowField,
    flow_direction: FlowDirection,
    warp: WarpDirection,
    inversion: FlowInversion,
) -> Result<SamplingField> {
    if flow_direction == warp.required_flow() {
        return Ok(SamplingField::new(flow.clone(), warp));
    }
    match inversion {
        FlowInversion::Strict => Err(Error::DirectionMismatch {
            flow: flow_direction,
            warp,
        }),
        FlowInversion::Negate => Ok(SamplingField::new(flow.negated(), warp)),
    }
}

/// Bilinear sample of a row-major image at real coordinates; pixels outside
/// the raster read as zero.
#[inline]
pub fn bilinear_sample(image: &[f64], width: usize, height: usize, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let read = |xi: f64, yi: f64| -> f64 {
        if xi < 0.0 || yi < 0.0 || xi >= width as f64 || yi >= height as f64 {
            0.0
        } else {
            image[yi as usize * width + xi as usize]
        }
    };
    let mut acc = 0.0;
    for (xi, wx) in [(x0, 1.0 - fx), (x0 + 1.0, fx)] {
        for (yi, wy) in [(y0, 1.0 - fy), (y0 + 1.0, fy)] {
            let w = wx * wy;
            if w != 0.0 {
                acc += w * read(xi, yi);
            }
        }
    }
    acc
}

/// Warped mask as real values in `[0, 1]`, before binarization.
pub fn warp_values(m: &BinaryMask, sampling: &SamplingField) -> Result<Vec<f64>> {
    ensure_same_dims(m.dims(), sampling.dims())?;
    let (w, h) = m.dims();
    let src = m.to_f64();
    let field = sampling.offsets();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = field.at(x, y);
            out.push(bilinear_sample(&src, w, h, x as f64 + dx, y as f64 + dy));
        }
    }
    Ok(out)
}

/// Warps a mask and binarizes it: sampled values `>= threshold` become foreground.
pub fn warp_mask(m: &BinaryMask, sampling: &SamplingField, threshold: f64) -> Result<BinaryMask> {
    let values = warp_values(m, sampling)?;
    let (w, h) = m.dims();
    let mut out = BinaryMask::new(w, h)?;
    for (i, _) in values.iter().enumerate().filter(|(_, &v)| v >= threshold) {
        out.set_index(i, true);
    }
    Ok(out)
}

/// Warps a prediction's mask, recomputes its box and keeps category and
/// score. Returns `None` when nothing of the mask survives the warp.
pub fn warp_prediction(p: &Prediction, sampling: &SamplingField) -> Result<Option<Prediction>> {
    let mask = warp_mask(p.mask(), sampling, DEFAULT_MASK_THRESHOLD)?;
    if mask.is_empty() {
        return Ok(None);
    }
    Prediction::new(mask, p.category(), p.score(), p.frame()).map(Some)
}
