//! Boundary maps, pixel neighborhoods and the line affinity between two pixels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default neighborhood radius for affinities and the random walk.
pub const DEFAULT_RADIUS: u32 = 5;

/// Per-pixel boundary likelihood, clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl BoundaryMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyRaster { width, height });
        }
        if values.len() != width * height {
            return Err(Error::BufferLength {
                expected: width * height,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("boundary map", "NaN likelihood"));
        }
        let values = values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn uniform(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Pixels `j` with `0 < |i - j| <= radius` (Euclidean) around each pixel `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    radius: u32,
}

impl NeighborhoodSpec {
    pub fn new(radius: u32) -> Result<Self> {
        if radius == 0 {
            return Err(Error::invalid("neighborhood radius", "must be at least 1"));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// Offsets `(dx, dy)` that come after the center in row-major order, so
    /// each unordered pair is visited once when scanning pixels.
    pub fn forward_offsets(&self) -> Vec<(i64, i64)> {
        let r = self.radius as i64;
        let mut out = Vec::new();
        for dy in 0..=r {
            for dx in -r..=r {
                if (dy > 0 || dx > 0) && dx * dx + dy * dy <= r * r {
                    out.push((dx, dy));
                }
            }
        }
        out
    }
}

impl Default for NeighborhoodSpec {
    fn default() -> Self {
        Self {
            radius: DEFAULT_RADIUS,
        }
    }
}

/// Rasterized segment between two pixels, both endpoints included.
///
/// The walk always starts from the endpoint that comes first in row-major
/// order, so `segment(a, b)` and `segment(b, a)` cover the same pixels. Minor
/// axis steps round half up.
pub fn segment(a: (usize, usize), b: (usize, usize)) -> Vec<(usize, usize)> {
    let (start, end) = if (a.1, a.0) <= (b.1, b.0) { (a, b) } else { (b, a) };
    segment_offsets(end.0 as i64 - start.0 as i64, end.1 as i64 - start.1 as i64)
        .into_iter()
        .map(|(dx, dy)| ((start.0 as i64 + dx) as usize, (start.1 as i64 + dy) as usize))
        .collect()
}

/// Bresenham walk from the origin to `(dx, dy)`, as offsets.
pub(crate) fn segment_offsets(dx: i64, dy: i64) -> Vec<(i64, i64)> {
    let (adx, ady) = (dx.abs(), dy.abs());
    let (sx, sy) = (dx.signum(), dy.signum());
    let x_major = adx >= ady;
    let (major, minor) = if x_major { (adx, ady) } else { (ady, adx) };
    let mut out = Vec::with_capacity(major as usize + 1);
    // remainder form of round-half-up: minor step when 2*t*minor + major crosses 2*major
    let mut rem = major;
    let mut m = 0i64;
    for t in 0..=major {
        if t > 0 {
            rem += 2 * minor;
            if rem >= 2 * major {
                rem -= 2 * major;
                m += 1;
            }
        }
        out.push(if x_major { (sx * t, sy * m) } else { (sx * m, sy * t) });
    }
    out
}

/// `1 - max B(k)` over the rasterized segment between `i` and `j`.
pub fn line_affinity(i: (usize, usize), j: (usize, usize), boundary: &BoundaryMap) -> Result<f64> {
    let (w, h) = boundary.dims();
    for (x, y) in [i, j] {
        if x >= w || y >= h {
            return Err(Error::invalid(
                "pixel",
                format!("({x}, {y}) lies outside the {w}x{h} raster"),
            ));
        }
    }
    let max = segment(i, j)
        .into_iter()
        .map(|(x, y)| boundary.at(x, y))
        .fold(0.0, f64::max);
    Ok(1.0 - max)
}

/// Precomputed forward neighbor offsets with their segment walks.
pub(crate) struct NeighborStencil {
    pub offsets: Vec<(i64, i64)>,
    pub segments: Vec<Vec<(i64, i64)>>,
}

impl NeighborStencil {
    pub fn new(nbhd: &NeighborhoodSpec) -> Self {
        let offsets = nbhd.forward_offsets();
        let segments = offsets
            .iter()
            .map(|&(dx, dy)| segment_offsets(dx, dy))
            .collect();
        Self { offsets, segments }
    }

    /// Affinity between `(x, y)` and its `k`-th forward neighbor, or `None`
    /// when that neighbor is off the raster. The center pixel is always the
    /// row-major-first endpoint, so this matches [`line_affinity`].
    #[inline]
    pub fn affinity(&self, boundary: &BoundaryMap, x: usize, y: usize, k: usize) -> Option<f64> {
        let (w, h) = boundary.dims();
        let (dx, dy) = self.offsets[k];
        let (jx, jy) = (x as i64 + dx, y as i64 + dy);
        if jx < 0 || jy < 0 || jx >= w as i64 || jy >= h as i64 {
            return None;
        }
        let max = self.segments[k]
            .iter()
            .map(|&(ox, oy)| boundary.at((x as i64 + ox) as usize, (y as i64 + oy) as usize))
            .fold(0.0, f64::max);
        Some(1.0 - max)
    }
}
