use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CamSpec, DepthModel, ObjectSpec, SceneSpec, Shape};
use crate::error::{Error, Result};
use crate::prediction::CategoryId;

/// Parameters for seeded scenes of non-overlapping fronto-parallel objects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomSceneParams {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub objects: usize,
    /// Categories are drawn from `1..=categories`.
    pub categories: u32,
    pub min_size: u32,
    pub max_size: u32,
    /// Largest speed per axis, pixels per frame.
    pub max_speed: f64,
    /// Restrict velocities to whole pixels per frame.
    pub integer_motion: bool,
    /// Gap kept between the regions objects sweep over the clip.
    pub margin: f64,
}

impl Default for RandomSceneParams {
    fn default() -> Self {
        Self {
            width: 160,
            height: 120,
            frames: 20,
            objects: 3,
            categories: 3,
            min_size: 20,
            max_size: 32,
            max_speed: 1.0,
            integer_motion: true,
            margin: 2.0,
        }
    }
}

const MAX_ATTEMPTS: usize = 10_000;

/// Draws a scene whose objects stay inside the raster and never overlap.
pub fn random_scene(p: &RandomSceneParams, seed: u64) -> Result<SceneSpec> {
    if p.categories == 0 || p.min_size == 0 || p.min_size > p.max_size || p.frames == 0 || p.max_speed.is_nan() || p.max_speed < 0.0 {
        return Err(Error::invalid("random scene parameters", format!("{p:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = (p.frames - 1) as f64;
    let mut objects: Vec<ObjectSpec> = Vec::with_capacity(p.objects);
    let mut swept: Vec<[f64; 4]> = Vec::with_capacity(p.objects);
    for k in 0..p.objects {
        let mut placed = false;
        for _ in 0..MAX_ATTEMPTS {
            let shape = if rng.gen_bool(0.5) { Shape::Rectangle } else { Shape::Ellipse };
            let w = rng.gen_range(p.min_size..=p.max_size) as f64;
            let h = rng.gen_range(p.min_size..=p.max_size) as f64;
            let mut speed = || {
                if p.integer_motion {
                    let m = p.max_speed.floor() as i64;
                    rng.gen_range(-m..=m) as f64
                } else {
                    rng.gen_range(-p.max_speed..=p.max_speed)
                }
            };
            let velocity = [speed(), speed()];
            let lo = [velocity[0].min(0.0) * span, velocity[1].min(0.0) * span];
            let hi = [velocity[0].max(0.0) * span, velocity[1].max(0.0) * span];
            let x_max = p.width as f64 - w - hi[0];
            let y_max = p.height as f64 - h - hi[1];
            if x_max < -lo[0] || y_max < -lo[1] {
                continue;
            }
            let x0 = rng.gen_range((-lo[0]).ceil() as i64..=x_max.floor() as i64) as f64;
            let y0 = rng.gen_range((-lo[1]).ceil() as i64..=y_max.floor() as i64) as f64;
            let region = [x0 + lo[0], y0 + lo[1], x0 + w + hi[0], y0 + h + hi[1]];
            let clear = swept.iter().all(|r| {
                region[2] + p.margin <= r[0]
                    || r[2] + p.margin <= region[0]
                    || region[3] + p.margin <= r[1]
                    || r[3] + p.margin <= region[1]
            });
            if !clear {
                continue;
            }
            swept.push(region);
            objects.push(ObjectSpec {
                shape,
                category: CategoryId(rng.gen_range(1..=p.categories)),
                size: [w, h],
                position: [x0 + w / 2.0, y0 + h / 2.0],
                velocity,
                depth: DepthModel::Constant { z: 1.0 },
            });
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::InvalidScene(format!("could not place object {k} without overlap")));
        }
    }
    let spec = SceneSpec {
        width: p.width,
        height: p.height,
        frames: p.frames,
        focal: 1.0,
        objects,
        seed,
        cam: CamSpec::default(),
        clipped: false,
    };
    spec.validate()?;
    Ok(spec)
}
