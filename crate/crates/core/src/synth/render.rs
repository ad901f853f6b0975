use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{CamSpec, ObjectSpec, SceneSpec, Shape};
use crate::error::{Error, Result};
use crate::field::{DisplacementField, FlowField, VectorField};
use crate::flowirn::ScoreMapStack;
use crate::maskconsist::PairSampling;
use crate::prediction::{CategoryId, InstanceLabelMap, PredictionSet, Provenance};
use crate::warp::{SamplingField, WarpDirection};

/// Continuous image extent `(x0, y0, x1, y1)` of an object on frame `t`.
pub(crate) fn image_extent(o: &ObjectSpec, focal: f64, t: f64) -> (f64, f64, f64, f64) {
    let (hw, hh) = o.half();
    let sx = |xi: f64| xi + t * focal * o.velocity[0] / o.depth.at(xi);
    let sy = |xi: f64| t * focal * o.velocity[1] / o.depth.at(xi);
    let (dy0, dy1) = (sy(-hw), sy(hw));
    (
        o.position[0] + sx(-hw),
        o.position[1] - hh + dy0.min(dy1),
        o.position[0] + sx(hw),
        o.position[1] + hh + dy0.max(dy1),
    )
}

/// Local x offset of the object point imaged at pixel `(px, py)` on frame
/// `t`, if that point lies on the object.
fn locate(o: &ObjectSpec, focal: f64, t: f64, px: f64, py: f64) -> Option<f64> {
    let (hw, hh) = o.half();
    let k = t * focal * o.velocity[0];
    let image_x = |xi: f64| xi + k / o.depth.at(xi);
    let d = px - o.position[0];
    if d < image_x(-hw) || d >= image_x(hw) {
        return None;
    }
    let xi = if k == 0.0 {
        d
    } else if o.depth.slope() == 0.0 {
        d - k / o.depth.at(0.0)
    } else {
        let (mut lo, mut hi) = (-hw, hw);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if image_x(mid) <= d {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let eta = py - o.position[1] - t * focal * o.velocity[1] / o.depth.at(xi);
    let inside = match o.shape {
        Shape::Rectangle => (-hw..hw).contains(&xi) && (-hh..hh).contains(&eta),
        Shape::Ellipse => (xi / hw).powi(2) + (eta / hh).powi(2) < 1.0,
    };
    inside.then_some(xi)
}

/// A validated scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    spec: SceneSpec,
}

/// Visible object index and its local x offset, per pixel.
type Ownership = Vec<Option<(usize, f64)>>;

impl Scene {
    pub fn new(spec: SceneSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    fn check_frame(&self, t: usize) -> Result<()> {
        if t < self.spec.frames {
            Ok(())
        } else {
            Err(Error::invalid("frame", format!("{t} outside a {}-frame scene", self.spec.frames)))
        }
    }

    /// Nearest object per pixel; equal depths go to the lower object index.
    fn ownership(&self, t: usize) -> Ownership {
        let s = &self.spec;
        let tf = t as f64;
        let extents: Vec<_> = s.objects.iter().map(|o| image_extent(o, s.focal, tf)).collect();
        let mut owner: Ownership = vec![None; s.width * s.height];
        let mut depth = vec![f64::INFINITY; s.width * s.height];
        for (k, (o, &(x0, y0, x1, y1))) in s.objects.iter().zip(&extents).enumerate() {
            let xs = x0.ceil().max(0.0) as usize..(x1.ceil().max(0.0) as usize).min(s.width);
            let ys = y0.ceil().max(0.0) as usize..(y1.ceil().max(0.0) as usize).min(s.height);
            for y in ys {
                for x in xs.clone() {
                    let Some(xi) = locate(o, s.focal, tf, x as f64, y as f64) else {
                        continue;
                    };
                    let z = o.depth.at(xi);
                    let i = y * s.width + x;
                    if z < depth[i] {
                        depth[i] = z;
                        owner[i] = Some((k, xi));
                    }
                }
            }
        }
        owner
    }

    fn flow_from_ownership(&self, owner: &Ownership, frames: f64) -> Result<FlowField> {
        let s = &self.spec;
        let mut u = vec![0.0; owner.len()];
        let mut v = vec![0.0; owner.len()];
        for (i, own) in owner.iter().enumerate() {
            if let Some((k, xi)) = *own {
                let o = &s.objects[k];
                let scale = frames * s.focal / o.depth.at(xi);
                u[i] = scale * o.velocity[0];
                v[i] = scale * o.velocity[1];
            }
        }
        VectorField::new(s.width, s.height, u, v)
    }

    /// Exact flow on frame `from`'s grid pointing to where each pixel's scene
    /// point sits on frame `to`; zero on background.
    pub fn flow_between(&self, from: usize, to: usize) -> Result<FlowField> {
        self.check_frame(from)?;
        self.check_frame(to)?;
        self.flow_from_ownership(&self.ownership(from), to as f64 - from as f64)
    }

    /// Sampling fields for the frame pair `(t, t2)` built from exact flows.
    pub fn pair_sampling(&self, t: usize, t2: usize) -> Result<PairSampling> {
        PairSampling::new(
            SamplingField::new(self.flow_between(t2, t)?, WarpDirection::TToT2),
            SamplingField::new(self.flow_between(t, t2)?, WarpDirection::T2ToT),
        )
    }

    /// Field that warps frame `t` forward onto frame `t + 1`.
    pub fn forward_sampling(&self, t: usize) -> Result<SamplingField> {
        Ok(SamplingField::new(self.flow_between(t + 1, t)?, WarpDirection::TToT2))
    }

    fn render_frame(&self, t: usize) -> Result<RenderedFrame> {
        let s = &self.spec;
        let (w, h) = (s.width, s.height);
        let owner = self.ownership(t);
        let labels: Vec<u32> = owner.iter().map(|o| o.map_or(0, |(k, _)| k as u32 + 1)).collect();
        let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, own) in owner.iter().enumerate() {
            if let Some((k, _)) = own {
                members.entry(*k).or_default().push(i);
            }
        }
        let categories = members.keys().map(|&k| (k as u32 + 1, s.objects[k].category)).collect();
        let labels = InstanceLabelMap::new(w, h, labels, categories)?;
        let ground_truth = labels.to_predictions(t, 1.0, Provenance::Model)?;
        let object_ids = members.keys().copied().collect();

        let mut du = vec![0.0; w * h];
        let mut dv = vec![0.0; w * h];
        let scene_categories = s.categories();
        let mut cams = vec![0.0f64; scene_categories.len() * w * h];
        for (&k, pixels) in &members {
            let n = pixels.len() as f64;
            let mx = pixels.iter().map(|&i| (i % w) as f64).sum::<f64>() / n;
            let my = pixels.iter().map(|&i| (i / w) as f64).sum::<f64>() / n;
            let dist = |i: usize| ((i % w) as f64 - mx).powi(2) + ((i / w) as f64 - my).powi(2);
            let anchor = pixels
                .iter()
                .copied()
                .fold(pixels[0], |best, i| if dist(i) < dist(best) { i } else { best });
            let (ax, ay) = ((anchor % w) as f64, (anchor / w) as f64);
            for &i in pixels {
                du[i] = ax - (i % w) as f64;
                dv[i] = ay - (i / w) as f64;
            }

            let c = scene_categories.binary_search(&s.objects[k].category).expect("scene category");
            let map = &mut cams[c * w * h..(c + 1) * w * h];
            let profile = object_cam(&s.cam, w, h, pixels, (mx, my));
            for (m, p) in map.iter_mut().zip(profile) {
                *m = (*m).max(p);
            }
        }
        if s.cam.noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            rng.set_stream(t as u64);
            for m in &mut cams {
                *m += s.cam.noise * rng.gen::<f64>();
            }
        }
        for m in &mut cams {
            if *m < s.cam.truncation {
                *m = 0.0;
            }
        }
        Ok(RenderedFrame {
            labels,
            ground_truth,
            object_ids,
            displacement: VectorField::new(w, h, du, dv)?,
            cams: ScoreMapStack::new(scene_categories, w, h, cams)?,
        })
    }

    /// Renders every frame plus the consecutive forward and backward flows.
    pub fn render(&self) -> Result<RenderedScene> {
        let n = self.spec.frames;
        let frames = (0..n).into_par_iter().map(|t| self.render_frame(t)).collect::<Result<Vec<_>>>()?;
        let forward_flows = (0..n.saturating_sub(1))
            .into_par_iter()
            .map(|t| self.flow_between(t, t + 1))
            .collect::<Result<Vec<_>>>()?;
        let backward_flows = (0..n.saturating_sub(1))
            .into_par_iter()
            .map(|t| self.flow_between(t + 1, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(RenderedScene {
            frames,
            forward_flows,
            backward_flows,
        })
    }
}

/// Blurred visible mask times a Gaussian profile centered on the visible
/// centroid, scaled to the visible box size.
fn object_cam(cam: &CamSpec, w: usize, h: usize, pixels: &[usize], centroid: (f64, f64)) -> Vec<f64> {
    let mut mask = vec![0.0; w * h];
    for &i in pixels {
        mask[i] = 1.0;
    }
    let (x0, x1) = pixels.iter().fold((w, 0), |(a, b), &i| (a.min(i % w), b.max(i % w)));
    let (y0, y1) = pixels.iter().fold((h, 0), |(a, b), &i| (a.min(i / w), b.max(i / w)));
    let sx = cam.profile_sigma * (x1 - x0 + 1) as f64;
    let sy = cam.profile_sigma * (y1 - y0 + 1) as f64;
    let blurred = gaussian_blur(&mask, w, h, cam.blur_sigma);
    blurred
        .into_iter()
        .enumerate()
        .map(|(i, b)| {
            let dx = (i % w) as f64 - centroid.0;
            let dy = (i / w) as f64 - centroid.1;
            b * (-(dx * dx) / (2.0 * sx * sx) - (dy * dy) / (2.0 * sy * sy)).exp()
        })
        .collect()
}

/// Separable Gaussian blur with zero padding.
fn gaussian_blur(image: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return image.to_vec();
    }
    let r = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-r..=r).map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / total).collect();
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, k) in kernel.iter().enumerate() {
                    let d = j as i64 - r;
                    let (sx, sy) = if horizontal { (x as i64 + d, y as i64) } else { (x as i64, y as i64 + d) };
                    if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h {
                        acc += k * src[sy as usize * w + sx as usize];
                    }
                }
                out[y * w + x] = acc;
            }
        }
        out
    };
    pass(&pass(image, true), false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    /// Instance ids are object index + 1.
    pub labels: InstanceLabelMap,
    /// Visible objects as score-1 predictions, in object order.
    pub ground_truth: PredictionSet,
    /// Object index of each ground-truth prediction.
    pub object_ids: Vec<usize>,
    /// Points from each object pixel to the object's anchor pixel.
    pub displacement: DisplacementField,
    pub cams: ScoreMapStack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedScene {
    pub frames: Vec<RenderedFrame>,
    /// `forward_flows[t]`: frame `t` to `t + 1`.
    pub forward_flows: Vec<FlowField>,
    /// `backward_flows[t]`: frame `t + 1` to `t`.
    pub backward_flows: Vec<FlowField>,
}

impl RenderedScene {
    pub fn ground_truth(&self) -> Vec<PredictionSet> {
        self.frames.iter().map(|f| f.ground_truth.clone()).collect()
    }

    pub fn object_ids(&self) -> Vec<Vec<usize>> {
        self.frames.iter().map(|f| f.object_ids.clone()).collect()
    }

    pub fn categories(&self) -> Vec<CategoryId> {
        self.frames.first().map(|f| f.cams.categories().to_vec()).unwrap_or_default()
    }
}

pub fn render_scene(spec: &SceneSpec) -> Result<RenderedScene> {
    Scene::new(spec.clone())?.render()
}
