//! Centered, unitary 2D Fourier transforms.
//!
//! Spectra are stored DC-centered: frequency (0, 0) sits at
//! `(height / 2, width / 2)` (integer division), so masks and crops work in
//! centered coordinates with no shifting at call sites. Both directions
//! scale by `1 / sqrt(height * width)`, which makes the pair unitary.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::slice::Slice;

/// Largest side accepted by [`dft2_direct`].
pub const DIRECT_DFT_MAX: usize = 64;

/// Complex row-major grid. Used both for DC-centered k-space
/// ([`Spectrum`]) and for complex image-space results ([`ComplexImage`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    height: usize,
    width: usize,
    values: Vec<Complex64>,
}

/// k-space array, DC at `(height / 2, width / 2)`.
pub type Spectrum = ComplexGrid;

/// Complex image returned by the inverse transform.
pub type ComplexImage = ComplexGrid;

impl ComplexGrid {
    pub fn new(height: usize, width: usize, values: Vec<Complex64>) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(Error::InvalidSlice(format!(
                "complex grid {height}x{width} with {} values",
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(ComplexGrid { height, width, values })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        ComplexGrid {
            height,
            width,
            values: vec![Complex64::new(0.0, 0.0); height * width],
        }
    }

    pub fn from_real(slice: &Slice) -> Self {
        ComplexGrid {
            height: slice.height(),
            width: slice.width(),
            values: slice.pixels().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
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

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.width + col]
    }

    /// Index of the DC bin in centered layout.
    pub fn center(&self) -> (usize, usize) {
        (self.height / 2, self.width / 2)
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn magnitude(&self) -> Slice {
        Slice::new(self.height, self.width, self.values.iter().map(|v| v.norm()).collect()).expect("finite magnitudes")
    }

    pub fn real(&self) -> Slice {
        Slice::new(self.height, self.width, self.values.iter().map(|v| v.re).collect()).expect("finite real part")
    }

    /// Copies the centered `out_h`×`out_w` block around DC into a new grid
    /// whose own DC is centered the same way.
    pub fn crop_center(&self, out_h: usize, out_w: usize) -> ComplexGrid {
        assert!(out_h <= self.height && out_w <= self.width);
        let r0 = self.height / 2 - out_h / 2;
        let c0 = self.width / 2 - out_w / 2;
        let mut out = Vec::with_capacity(out_h * out_w);
        for r in 0..out_h {
            let start = (r0 + r) * self.width + c0;
            out.extend_from_slice(&self.values[start..start + out_w]);
        }
        ComplexGrid {
            height: out_h,
            width: out_w,
            values: out,
        }
    }

    /// Embeds this grid in a zero `out_h`×`out_w` grid, aligning DC bins.
    pub fn pad_center(&self, out_h: usize, out_w: usize) -> ComplexGrid {
        assert!(out_h >= self.height && out_w >= self.width);
        let mut out = ComplexGrid::zeros(out_h, out_w);
        let r0 = out_h / 2 - self.height / 2;
        let c0 = out_w / 2 - self.width / 2;
        for r in 0..self.height {
            let dst = (r0 + r) * out_w + c0;
            out.values[dst..dst + self.width].copy_from_slice(&self.values[r * self.width..(r + 1) * self.width]);
        }
        out
    }
}

/// Moves natural-order index 0 to `n / 2` along both axes.
fn fftshift(values: &[Complex64], height: usize, width: usize) -> Vec<Complex64> {
    let (sh, sw) = (height / 2, width / 2);
    let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
    for r in 0..height {
        let rr = (r + sh) % height;
        for c in 0..width {
            out[rr * width + (c + sw) % width] = values[r * width + c];
        }
    }
    out
}

fn ifftshift(values: &[Complex64], height: usize, width: usize) -> Vec<Complex64> {
    let (sh, sw) = (height / 2, width / 2);
    let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
    for r in 0..height {
        let rr = (r + sh) % height;
        for c in 0..width {
            out[r * width + c] = values[rr * width + (c + sw) % width];
        }
    }
    out
}

/// Unnormalized in-place 2D FFT over a row-major buffer.
fn fft2_in_place(buf: &mut [Complex64], height: usize, width: usize, direction: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft(width, direction);
    let mut scratch = vec![Complex64::new(0.0, 0.0); row_fft.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(width) {
        row_fft.process_with_scratch(row, &mut scratch);
    }

    let col_fft = planner.plan_fft(height, direction);
    let mut scratch = vec![Complex64::new(0.0, 0.0); col_fft.get_inplace_scratch_len()];
    let mut column = vec![Complex64::new(0.0, 0.0); height];
    for c in 0..width {
        for r in 0..height {
            column[r] = buf[r * width + c];
        }
        col_fft.process_with_scratch(&mut column, &mut scratch);
        for r in 0..height {
            buf[r * width + c] = column[r];
        }
    }
}

/// Forward unitary 2D DFT with DC moved to the center.
pub fn fft2_centered(slice: &Slice) -> Spectrum {
    let (h, w) = slice.dims();
    let mut buf: Vec<Complex64> = slice.pixels().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_in_place(&mut buf, h, w, FftDirection::Forward);
    let norm = 1.0 / ((h * w) as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= norm);
    ComplexGrid {
        height: h,
        width: w,
        values: fftshift(&buf, h, w),
    }
}

/// Exact inverse of [`fft2_centered`]. Returns the complex image; callers
/// project to magnitude or real part as needed.
pub fn ifft2_centered(spectrum: &Spectrum) -> ComplexImage {
    let (h, w) = spectrum.dims();
    let mut buf = ifftshift(&spectrum.values, h, w);
    fft2_in_place(&mut buf, h, w, FftDirection::Inverse);
    let norm = 1.0 / ((h * w) as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= norm);
    ComplexGrid {
        height: h,
        width: w,
        values: buf,
    }
}

/// Centered unitary DFT evaluated from the defining double sum. Quadratic
/// in the pixel count, so limited to 64×64; used as a verification oracle.
pub fn dft2_direct(slice: &Slice) -> Result<Spectrum> {
    let (h, w) = slice.dims();
    if h > DIRECT_DFT_MAX || w > DIRECT_DFT_MAX {
        return Err(Error::SizeGuard { height: h, width: w });
    }
    // Twiddles indexed by (k * m) mod n keep the phase argument small.
    let twiddles = |n: usize| -> Vec<Complex64> {
        (0..n)
            .map(|j| Complex64::from_polar(1.0, -2.0 * PI * j as f64 / n as f64))
            .collect()
    };
    let (tw_h, tw_w) = (twiddles(h), twiddles(w));
    let (ch, cw) = (h / 2, w / 2);
    let norm = 1.0 / ((h * w) as f64).sqrt();
    let px = slice.pixels();
    let mut out = Vec::with_capacity(h * w);
    for u in 0..h {
        let ku = (u + h - ch) % h;
        for v in 0..w {
            let kv = (v + w - cw) % w;
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..h {
                let row_phase = tw_h[(ku * m) % h];
                for n in 0..w {
                    acc += px[m * w + n] * row_phase * tw_w[(kv * n) % w];
                }
            }
            out.push(acc * norm);
        }
    }
    Ok(ComplexGrid {
        height: h,
        width: w,
        values: out,
    })
}
