//! Spatial derivatives of optical flow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FlowField;

/// `[du/dx, du/dy, dv/dx, dv/dy]` at one pixel.
pub type Jacobian = [f64; 4];

/// Per-pixel 2x2 flow Jacobian on the flow's raster.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowJacobianField {
    width: usize,
    height: usize,
    data: Vec<Jacobian>,
}

impl FlowJacobianField {
    pub fn new(width: usize, height: usize, data: Vec<Jacobian>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyRaster { width, height });
        }
        if data.len() != width * height {
            return Err(Error::BufferLength {
                expected: width * height,
                actual: data.len(),
            });
        }
        if data.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("jacobian", "non-finite entry"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[Jacobian] {
        &self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Jacobian {
        self.data[y * self.width + x]
    }
}

/// How the difference of two Jacobians is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianNorm {
    /// Frobenius norm of the full 2x2 difference.
    #[default]
    Frobenius,
    /// Euclidean norm of `(du/dx, dv/dy)` only: each flow component
    /// differentiated along its own axis.
    Diagonal,
}

impl JacobianNorm {
    #[inline]
    pub fn difference(self, a: &Jacobian, b: &Jacobian) -> f64 {
        match self {
            JacobianNorm::Frobenius => a
                .iter()
                .zip(b)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt(),
            JacobianNorm::Diagonal => (a[0] - b[0]).hypot(a[3] - b[3]),
        }
    }
}

/// Central differences inside the raster, one-sided differences on the border rows and columns.
pub fn flow_jacobian(flow: &FlowField) -> Result<FlowJacobianField> {
    let (w, h) = flow.dims();
    if w < 3 || h < 3 {
        return Err(Error::RasterTooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let (u, v) = (flow.u(), flow.v());
    let dx = |f: &[f64], x: usize, y: usize| -> f64 {
        let row = y * w;
        if x == 0 {
            f[row + 1] - f[row]
        } else if x == w - 1 {
            f[row + x] - f[row + x - 1]
        } else {
            (f[row + x + 1] - f[row + x - 1]) / 2.0
        }
    };
    let dy = |f: &[f64], x: usize, y: usize| -> f64 {
        if y == 0 {
            f[w + x] - f[x]
        } else if y == h - 1 {
            f[y * w + x] - f[(y - 1) * w + x]
        } else {
            (f[(y + 1) * w + x] - f[(y - 1) * w + x]) / 2.0
        }
    };
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            data.push([dx(u, x, y), dy(u, x, y), dx(v, x, y), dy(v, x, y)]);
        }
    }
    FlowJacobianField::new(w, h, data)
}
