//! Dense per-pixel 2-vector fields (optical flow, centroid displacement).

use crate::error::{Error, Result};

/// Row-major field of `(u, v)` vectors, `u` along x and `v` along y, in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    width: usize,
    height: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

/// Estimated optical flow between two frames.
pub type FlowField = VectorField;

/// Per-pixel offset towards the centroid of the instance the pixel belongs to.
pub type DisplacementField = VectorField;

impl VectorField {
    pub fn new(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyRaster { width, height });
        }
        for buf in [&u, &v] {
            if buf.len() != width * height {
                return Err(Error::BufferLength {
                    expected: width * height,
                    actual: buf.len(),
                });
            }
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::invalid("vector field", "non-finite component"));
        }
        Ok(Self {
            width,
            height,
            u,
            v,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(
            width,
            height,
            vec![0.0; width * height],
            vec![0.0; width * height],
        )
    }

    pub fn constant(width: usize, height: usize, u: f64, v: f64) -> Result<Self> {
        Self::new(
            width,
            height,
            vec![u; width * height],
            vec![v; width * height],
        )
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> (f64, f64),
    ) -> Result<Self> {
        let n = width * height;
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                u.push(a);
                v.push(b);
            }
        }
        Self::new(width, height, u, v)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    /// Euclidean length of every vector, row-major.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(a, b)| a.hypot(*b))
            .collect()
    }

    pub fn negated(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            u: self.u.iter().map(|x| -x).collect(),
            v: self.v.iter().map(|x| -x).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.u.iter().chain(&self.v).all(|&x| x == 0.0)
    }
}
