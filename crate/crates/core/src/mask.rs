//! Bit-packed binary masks, half-open boxes and the overlap measures built on them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_dims, Error, Result};

/// Row-major occupancy raster, one bit per pixel.
///
/// Bits are packed contiguously across rows; bits past `width * height` in the
/// last word are always zero so that popcounts and equality stay exact.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    words: Vec<u64>,
}

impl BinaryMask {
    /// An all-background mask.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyRaster { width, height });
        }
        let words = vec![0u64; (width * height).div_ceil(64)];
        Ok(Self {
            width,
            height,
            words,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let mut mask = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    mask.set(x, y, true);
                }
            }
        }
        Ok(mask)
    }

    pub fn from_bools(width: usize, height: usize, bits: &[bool]) -> Result<Self> {
        let mut mask = Self::new(width, height)?;
        if bits.len() != width * height {
            return Err(Error::BufferLength {
                expected: width * height,
                actual: bits.len(),
            });
        }
        for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
            mask.words[i / 64] |= 1 << (i % 64);
        }
        Ok(mask)
    }

    /// Filled rectangle `[x0, x1) x [y0, y1)`, clipped to the raster.
    pub fn from_box(width: usize, height: usize, bbox: BBox) -> Result<Self> {
        Self::from_fn(width, height, |x, y| bbox.contains(x, y))
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

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.get_index(y * self.width + x)
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        debug_assert!(x < self.width && y < self.height);
        self.set_index(y * self.width + x, value);
    }

    #[inline]
    pub fn set_index(&mut self, i: usize, value: bool) {
        let bit = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= bit;
        } else {
            self.words[i / 64] &= !bit;
        }
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersection_area(&self, other: &Self) -> Result<usize> {
        ensure_same_dims(self.dims(), other.dims())?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a & b)
    }

    fn combine(&self, other: &Self, op: impl Fn(u64, u64) -> u64) -> Result<Self> {
        ensure_same_dims(self.dims(), other.dims())?;
        Ok(Self {
            width: self.width,
            height: self.height,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }

    /// Foreground pixel coordinates in row-major order.
    pub fn iter_ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.width;
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                let i = wi * 64 + bit;
                Some((i % width, i / width))
            })
        })
    }

    /// Mask values as `0.0` / `1.0`, row-major.
    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| if self.get_index(i) { 1.0 } else { 0.0 })
            .collect()
    }
}

impl fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area())
            .finish()
    }
}

/// Half-open pixel box `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Self> {
        if x0 > x1 || y0 > y1 {
            return Err(Error::invalid(
                "bbox",
                format!("[{x0},{y0},{x1},{y1}] has negative extent"),
            ));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0 as usize..self.x1 as usize).contains(&x)
            && (self.y0 as usize..self.y1 as usize).contains(&y)
    }

    pub fn to_array(self) -> [u32; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }
}

/// Intersection over union of two masks; `0.0` when both are empty.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let inter = a.intersection_area(b)?;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Intersection over the area of the smaller mask.
pub fn mask_iom(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let inter = a.intersection_area(b)?;
    let smaller = a.area().min(b.area());
    match (a.area(), b.area()) {
        (0, 0) => Err(Error::BothMasksEmpty),
        // one empty mask: nothing of it can be covered
        _ if smaller == 0 => Ok(0.0),
        _ => Ok(inter as f64 / smaller as f64),
    }
}

pub fn box_iou(a: &BBox, b: &BBox) -> f64 {
    let ix = a.x1.min(b.x1).saturating_sub(a.x0.max(b.x0)) as u64;
    let iy = a.y1.min(b.y1).saturating_sub(a.y0.max(b.y0)) as u64;
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Tightest half-open box around the foreground.
pub fn bbox_of_mask(m: &BinaryMask) -> Result<BBox> {
    let mut ones = m.iter_ones();
    let (fx, fy) = ones.next().ok_or(Error::EmptyMask)?;
    // row-major order: the first pixel has the smallest y
    let y0 = fy;
    let (mut x0, mut x1, mut y1) = (fx, fx, fy);
    for (x, y) in ones {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    Ok(BBox {
        x0: x0 as u32,
        y0: y0 as u32,
        x1: x1 as u32 + 1,
        y1: y1 as u32 + 1,
    })
}
