//! Degradation paths and non-learned baseline reconstructions.
//!
//! * undersample: mask the full-resolution spectrum, zero-fill, invert.
//! * lowres: keep only the central k-space block (a smaller acquisition).
//! * combined: low-resolution acquisition, then masked at low resolution.
//!
//! The Fourier chain stays linear up to the final magnitude; clipping to
//! [0, 1] only happens in bicubic resampling and at serialization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{fft2_centered, ifft2_centered, Spectrum};
use crate::masks::Mask;
use crate::slice::Slice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradePath {
    Undersample,
    Lowres,
    Combined,
}

impl fmt::Display for DegradePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DegradePath::Undersample => "undersample",
            DegradePath::Lowres => "lowres",
            DegradePath::Combined => "combined",
        })
    }
}

impl FromStr for DegradePath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "undersample" => Ok(DegradePath::Undersample),
            "lowres" => Ok(DegradePath::Lowres),
            "combined" => Ok(DegradePath::Combined),
            _ => Err(Error::UnknownKind(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recon {
    /// Magnitude of the zero-filled inverse transform at acquisition size.
    #[default]
    ZeroFilled,
    /// Zero-filled, then bicubic-upscaled back to the source size.
    ZeroFilledPlusBicubic,
    /// No reconstruction step beyond the acquisition itself; same geometry
    /// as `ZeroFilled`.
    None,
}

impl FromStr for Recon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "zero_filled" => Ok(Recon::ZeroFilled),
            "zero_filled_plus_bicubic" => Ok(Recon::ZeroFilledPlusBicubic),
            "none" => Ok(Recon::None),
            _ => Err(Error::UnknownKind(s.to_string())),
        }
    }
}

/// How the low-resolution image is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DownscaleMethod {
    /// Central k-space crop (a genuine low-resolution acquisition).
    #[default]
    Kspace,
    /// Image-space Catmull–Rom resampling, for sensitivity checks.
    Bicubic,
}

impl fmt::Display for DownscaleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DownscaleMethod::Kspace => "kspace",
            DownscaleMethod::Bicubic => "bicubic",
        })
    }
}

impl FromStr for DownscaleMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kspace" => Ok(DownscaleMethod::Kspace),
            "bicubic" => Ok(DownscaleMethod::Bicubic),
            _ => Err(Error::UnknownKind(s.to_string())),
        }
    }
}

/// One acquisition path plus the baseline reconstruction applied after it.
#[derive(Debug, Clone)]
pub struct DegradeSpec {
    pub path: DegradePath,
    pub downscale: usize,
    pub mask: Option<Mask>,
    pub recon: Recon,
    pub downscale_method: DownscaleMethod,
}

impl DegradeSpec {
    pub fn undersample(mask: Mask) -> Self {
        DegradeSpec {
            path: DegradePath::Undersample,
            downscale: 1,
            mask: Some(mask),
            recon: Recon::ZeroFilled,
            downscale_method: DownscaleMethod::Kspace,
        }
    }

    pub fn lowres(downscale: usize) -> Self {
        DegradeSpec {
            path: DegradePath::Lowres,
            downscale,
            mask: None,
            recon: Recon::ZeroFilled,
            downscale_method: DownscaleMethod::Kspace,
        }
    }

    pub fn combined(downscale: usize, mask: Mask) -> Self {
        DegradeSpec {
            path: DegradePath::Combined,
            downscale,
            mask: Some(mask),
            recon: Recon::ZeroFilled,
            downscale_method: DownscaleMethod::Kspace,
        }
    }

    pub fn with_recon(mut self, recon: Recon) -> Self {
        self.recon = recon;
        self
    }

    pub fn with_downscale_method(mut self, method: DownscaleMethod) -> Self {
        self.downscale_method = method;
        self
    }

    /// Checks these settings against a source of size `height`×`width`.
    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        let s = self.downscale;
        if s == 0 {
            return Err(Error::SpecViolation("downscale must be >= 1".into()));
        }
        match self.path {
            DegradePath::Undersample if s != 1 => {
                return Err(Error::SpecViolation("undersample path requires downscale 1".into()))
            }
            DegradePath::Lowres if self.mask.is_some() => {
                return Err(Error::SpecViolation("lowres path takes no mask".into()))
            }
            DegradePath::Undersample | DegradePath::Combined if self.mask.is_none() => {
                return Err(Error::SpecViolation(format!("{} path requires a mask", self.path)))
            }
            _ => {}
        }
        if !height.is_multiple_of(s) || !width.is_multiple_of(s) {
            return Err(Error::DivisibilityViolation {
                height,
                width,
                factor: s,
            });
        }
        if let Some(mask) = &self.mask {
            if mask.dims() != (height / s, width / s) {
                return Err(Error::SpecViolation(format!(
                    "mask is {}x{}, expected {}x{}",
                    mask.height(),
                    mask.width(),
                    height / s,
                    width / s
                )));
            }
        }
        Ok(())
    }
}

/// Zeroes every bin the mask does not sample.
pub fn apply_mask(spectrum: &Spectrum, mask: &Mask) -> Result<Spectrum> {
    if spectrum.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            left: spectrum.dims(),
            right: mask.dims(),
        });
    }
    let mut out = spectrum.clone();
    for (v, &keep) in out.values_mut().iter_mut().zip(mask.bits()) {
        if !keep {
            *v = Default::default();
        }
    }
    Ok(out)
}

/// Low-resolution acquisition: keeps the central (H/s)×(W/s) k-space
/// block, scales it by 1/s, inverts and takes the magnitude. Constant
/// images are fixed points.
pub fn kspace_downscale(slice: &Slice, s: usize) -> Result<Slice> {
    let (h, w) = slice.dims();
    if s == 0 || h % s != 0 || w % s != 0 {
        return Err(Error::DivisibilityViolation {
            height: h,
            width: w,
            factor: s,
        });
    }
    if s == 1 {
        return Ok(slice.clone());
    }
    let mut block = fft2_centered(slice).crop_center(h / s, w / s);
    block.scale(1.0 / s as f64);
    Ok(ifft2_centered(&block).magnitude())
}

/// Fourier-domain upsampling: zero-pads the spectrum to (H·s)×(W·s),
/// scales by s, inverts and takes the magnitude.
pub fn kspace_upscale(slice: &Slice, s: usize) -> Result<Slice> {
    if s == 0 {
        return Err(Error::InvalidParams("upscale factor must be >= 1".into()));
    }
    if s == 1 {
        return Ok(slice.clone());
    }
    let (h, w) = slice.dims();
    let mut padded = fft2_centered(slice).pad_center(h * s, w * s);
    padded.scale(s as f64);
    Ok(ifft2_centered(&padded).magnitude())
}

/// Catmull–Rom cubic convolution kernel (a = -0.5).
pub fn catmull_rom(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((A * t - 5.0 * A) * t + 8.0 * A) * t - 4.0 * A
    } else {
        0.0
    }
}

/// Per-output-sample (first source index, four weights) along one axis,
/// with pixel-center alignment. Indices are clamped by the caller.
fn axis_taps(n_in: usize, n_out: usize) -> Vec<(i64, [f64; 4])> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|i| {
            let src = (i as f64 + 0.5) * scale - 0.5;
            let base = src.floor();
            let frac = src - base;
            let weights = [
                catmull_rom(frac + 1.0),
                catmull_rom(frac),
                catmull_rom(1.0 - frac),
                catmull_rom(2.0 - frac),
            ];
            (base as i64 - 1, weights)
        })
        .collect()
}

fn resample_unclipped(slice: &Slice, out_h: usize, out_w: usize) -> Vec<f64> {
    let (h, w) = slice.dims();
    let clamp = |i: i64, n: usize| i.clamp(0, n as i64 - 1) as usize;
    let px = slice.pixels();

    let col_taps = axis_taps(w, out_w);
    let mut rows = vec![0.0; h * out_w];
    for r in 0..h {
        let src = &px[r * w..(r + 1) * w];
        for (j, (start, wts)) in col_taps.iter().enumerate() {
            rows[r * out_w + j] = (0..4).map(|k| wts[k] * src[clamp(start + k as i64, w)]).sum();
        }
    }

    let row_taps = axis_taps(h, out_h);
    let mut out = vec![0.0; out_h * out_w];
    for (i, (start, wts)) in row_taps.iter().enumerate() {
        for j in 0..out_w {
            out[i * out_w + j] = (0..4)
                .map(|k| wts[k] * rows[clamp(start + k as i64, h) * out_w + j])
                .sum();
        }
    }
    out
}

/// Separable Catmull–Rom resampling to `out_h`×`out_w` with edge clamping;
/// the result is clipped to [0, 1].
pub fn bicubic_resample(slice: &Slice, out_h: usize, out_w: usize) -> Result<Slice> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidParams(format!(
            "output dims must be positive, got {out_h}x{out_w}"
        )));
    }
    let out = resample_unclipped(slice, out_h, out_w);
    Slice::new(out_h, out_w, out.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

/// Low-resolution version of `slice` using the chosen method.
pub fn downscale(slice: &Slice, s: usize, method: DownscaleMethod) -> Result<Slice> {
    match method {
        DownscaleMethod::Kspace => kspace_downscale(slice, s),
        DownscaleMethod::Bicubic => {
            let (h, w) = slice.dims();
            if s == 0 || h % s != 0 || w % s != 0 {
                return Err(Error::DivisibilityViolation {
                    height: h,
                    width: w,
                    factor: s,
                });
            }
            bicubic_resample(slice, h / s, w / s)
        }
    }
}

/// Zero-filled reconstruction of a masked acquisition of `slice`.
pub fn zero_filled(slice: &Slice, mask: &Mask) -> Result<Slice> {
    let masked = apply_mask(&fft2_centered(slice), mask)?;
    Ok(ifft2_centered(&masked).magnitude())
}

/// Runs one acquisition path. The result has the source size when the
/// recon ends in bicubic upscaling, and the acquisition size otherwise.
pub fn degrade(slice: &Slice, spec: &DegradeSpec) -> Result<Slice> {
    let (h, w) = slice.dims();
    spec.validate(h, w)?;
    let acquired = match spec.path {
        DegradePath::Undersample => zero_filled(slice, spec.mask.as_ref().expect("validated"))?,
        DegradePath::Lowres => downscale(slice, spec.downscale, spec.downscale_method)?,
        DegradePath::Combined => {
            let low = downscale(slice, spec.downscale, spec.downscale_method)?;
            zero_filled(&low, spec.mask.as_ref().expect("validated"))?
        }
    };
    match spec.recon {
        Recon::ZeroFilledPlusBicubic if acquired.dims() != (h, w) => bicubic_resample(&acquired, h, w),
        _ => Ok(acquired),
    }
}
