//! Deterministic synthetic scenes with exact masks, flow, displacement fields
//! and CAM-like score maps, plus controlled label corruption.
//!
//! Objects translate parallel to the image plane. A point at object-local
//! offset `xi` has depth `Z(xi_x)` and moves `f * V / Z` pixels per frame,
//! so a tilted plane (`Z = z0 + g * xi_x`) produces spatially varying flow
//! with a smooth flow gradient. Pixel `(x, y)` samples the scene at its
//! integer coordinates.

mod corrupt;
mod random;
mod render;
mod score;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::CategoryId;

pub use corrupt::{corrupt_labels, CorruptedLabels, CorruptionKind, CorruptionRecord, CorruptionSpec};
pub use random::{random_scene, RandomSceneParams};
pub use render::{render_scene, RenderedFrame, RenderedScene, Scene};
pub use score::{score_recovery, RecoveryScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Rectangle,
    Ellipse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DepthModel {
    Constant { z: f64 },
    /// `Z = z0 + g * xi_x`, with `xi_x` measured from the object center.
    Linear { z0: f64, g: f64 },
}

impl DepthModel {
    pub fn at(&self, xi: f64) -> f64 {
        match *self {
            DepthModel::Constant { z } => z,
            DepthModel::Linear { z0, g } => z0 + g * xi,
        }
    }

    fn slope(&self) -> f64 {
        match *self {
            DepthModel::Constant { .. } => 0.0,
            DepthModel::Linear { g, .. } => g,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub shape: Shape,
    pub category: CategoryId,
    /// Width and height in pixels.
    pub size: [f64; 2],
    /// Center on frame 0.
    pub position: [f64; 2],
    /// Velocity `(V_X, V_Y)`; image motion is `f * V / Z`.
    pub velocity: [f64; 2],
    pub depth: DepthModel,
}

impl ObjectSpec {
    fn half(&self) -> (f64, f64) {
        (self.size[0] / 2.0, self.size[1] / 2.0)
    }

    /// Smallest depth over the object's extent.
    fn min_depth(&self) -> f64 {
        let (hw, _) = self.half();
        self.depth.at(-hw).min(self.depth.at(hw))
    }
}

/// Shape of the emulated class activation maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CamSpec {
    /// Gaussian blur applied to each visible mask, in pixels.
    pub blur_sigma: f64,
    /// Width of the center-peaked profile as a fraction of the object size.
    pub profile_sigma: f64,
    /// Scores below this value are zeroed.
    pub truncation: f64,
    /// Amplitude of seeded uniform noise added to every score.
    pub noise: f64,
}

impl Default for CamSpec {
    fn default() -> Self {
        Self {
            blur_sigma: 1.0,
            profile_sigma: 0.5,
            truncation: 0.05,
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// Focal length `f`.
    pub focal: f64,
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cam: CamSpec,
    /// Allow objects to leave the raster.
    #[serde(default)]
    pub clipped: bool,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScene(msg));
        if self.width == 0 || self.height == 0 {
            return Err(Error::EmptyRaster {
                width: self.width,
                height: self.height,
            });
        }
        if self.frames == 0 {
            return bad("scene needs at least one frame".into());
        }
        if !(self.focal.is_finite() && self.focal > 0.0) {
            return bad(format!("focal length {} must be positive", self.focal));
        }
        let cam = &self.cam;
        if !(cam.blur_sigma >= 0.0 && cam.profile_sigma > 0.0 && cam.truncation >= 0.0 && cam.noise >= 0.0) {
            return bad(format!("invalid CAM parameters {cam:?}"));
        }
        let span = (self.frames - 1) as f64;
        for (k, o) in self.objects.iter().enumerate() {
            if o.category.is_background() {
                return bad(format!("object {k} uses the background category"));
            }
            let finite = o.size.iter().chain(&o.position).chain(&o.velocity).all(|v| v.is_finite());
            if !finite || o.size[0] <= 0.0 || o.size[1] <= 0.0 {
                return bad(format!("object {k} has an invalid size, position or velocity"));
            }
            let z_min = o.min_depth();
            if !(z_min.is_finite() && z_min > 0.0) {
                return bad(format!("object {k} has non-positive depth {z_min}"));
            }
            // the local-to-image map along x must stay monotonic on every frame
            let shear = span * (self.focal * o.velocity[0] * o.depth.slope()).abs() / (z_min * z_min);
            if shear >= 1.0 {
                return bad(format!("object {k} folds over itself (depth slope too steep for its motion)"));
            }
            if !self.clipped {
                for t in 0..self.frames {
                    let (x0, y0, x1, y1) = render::image_extent(o, self.focal, t as f64);
                    if x0 < 0.0 || y0 < 0.0 || x1 > self.width as f64 || y1 > self.height as f64 {
                        return bad(format!("object {k} leaves the raster on frame {t}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Distinct object categories, ascending.
    pub fn categories(&self) -> Vec<CategoryId> {
        let mut c: Vec<CategoryId> = self.objects.iter().map(|o| o.category).collect();
        c.sort();
        c.dedup();
        c
    }
}
