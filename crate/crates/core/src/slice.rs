//! The real-valued 2D image every other module operates on.

use crate::error::{Error, Result};

/// Row-major real image with nominal intensity range [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl Slice {
    /// Builds a slice, checking the length and finiteness invariants.
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidSlice(format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        let expected = height.checked_mul(width).ok_or(Error::DimensionOverflow {
            height: height as u64,
            width: width as u64,
        })?;
        if pixels.len() != expected {
            return Err(Error::InvalidSlice(format!(
                "expected {expected} pixels, got {}",
                pixels.len()
            )));
        }
        if let Some(index) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Slice { height, width, pixels })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Slice::new(height, width, vec![value; height * width])
    }

    /// Builds a slice by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Slice::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    /// Applies `f` to every pixel; the result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Slice> {
        Slice::new(self.height, self.width, self.pixels.iter().map(|&v| f(v)).collect())
    }

    pub fn min(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Sum of squared intensities.
    pub fn energy(&self) -> f64 {
        self.pixels.iter().map(|v| v * v).sum()
    }

    pub(crate) fn ensure_same_dims(&self, other: &Slice) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }
}
