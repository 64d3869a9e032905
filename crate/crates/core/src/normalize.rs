//! Intensity normalization.
//!
//! Percentile normalization maps the [p_lo, p_hi] percentile range to
//! [0, 1]. Histogram normalization fits a polynomial to the slice
//! histogram, locates the first minimum `m` and the first maximum `M` above
//! it from zero crossings of the derivative, and maps the window of width
//! `α·|M − m|` centered on `M` to [0, 1]. Both clip to [0, 1].

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slice::Slice;

pub const DEFAULT_BINS: usize = 256;
pub const DEFAULT_DEGREE: usize = 15;
pub const DEFAULT_ALPHA: f64 = 5.0;

/// Grid used to bracket derivative zero crossings.
const EXTREMA_GRID: usize = 4096;
const EXTREMA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Percentile,
    Histogram,
    None,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Percentile => "percentile",
            Normalization::Histogram => "histogram",
            Normalization::None => "none",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "percentile" => Ok(Normalization::Percentile),
            "histogram" => Ok(Normalization::Histogram),
            "none" => Ok(Normalization::None),
            _ => Err(Error::UnknownKind(s.to_string())),
        }
    }
}

/// Percentile of `values` with linear interpolation between order
/// statistics (position `p/100 · (n − 1)` in sorted order).
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidParams(format!("percentile {p} outside [0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, p))
}

fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let t = pos - lo as f64;
    sorted[lo] + t * (sorted[hi] - sorted[lo])
}

/// `clip((x − p_lo) / (p_hi − p_lo), 0, 1)` using slice percentiles.
pub fn normalize_percentile(slice: &Slice, p_lo: f64, p_hi: f64) -> Result<Slice> {
    if !(0.0..=100.0).contains(&p_lo) || !(0.0..=100.0).contains(&p_hi) || p_lo >= p_hi {
        return Err(Error::InvalidParams(format!("percentiles ({p_lo}, {p_hi})")));
    }
    let mut sorted = slice.pixels().to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = percentile_sorted(&sorted, p_lo);
    let hi = percentile_sorted(&sorted, p_hi);
    if hi <= lo {
        return Err(Error::DegenerateRange { lo, hi });
    }
    slice.map(|x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0))
}

/// Least-squares polynomial in monomials of `t`, where `t` is intensity
/// mapped affinely from `domain` onto [−1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    pub degree: usize,
    /// Ascending powers: `coeffs[k]` multiplies `t^k`.
    pub coeffs: Vec<f64>,
    pub domain: (f64, f64),
}

impl PolyFit {
    pub fn new(coeffs: Vec<f64>, domain: (f64, f64)) -> Result<Self> {
        if coeffs.is_empty() || !(domain.0 < domain.1) {
            return Err(Error::InvalidParams("empty coefficients or empty domain".into()));
        }
        Ok(PolyFit {
            degree: coeffs.len() - 1,
            coeffs,
            domain,
        })
    }

    pub fn to_unit(&self, x: f64) -> f64 {
        2.0 * (x - self.domain.0) / (self.domain.1 - self.domain.0) - 1.0
    }

    pub fn from_unit(&self, t: f64) -> f64 {
        self.domain.0 + (t + 1.0) * 0.5 * (self.domain.1 - self.domain.0)
    }

    /// Value at rescaled coordinate `t` (Horner).
    pub fn eval_unit(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// d/dt at rescaled coordinate `t`.
    pub fn deriv_unit(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * t + k as f64 * c)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_unit(self.to_unit(x))
    }
}

/// Histogram of a slice over `[min, max]` with uniform bins, counts scaled
/// so the tallest bin is 1. Returns (bin centers, scaled counts).
pub fn histogram(slice: &Slice, bin_count: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = (slice.min(), slice.max());
    if !(hi > lo) {
        return Err(Error::ConstantSlice);
    }
    let width = (hi - lo) / bin_count as f64;
    let mut counts = vec![0.0; bin_count];
    for &x in slice.pixels() {
        let b = (((x - lo) / width) as usize).min(bin_count - 1);
        counts[b] += 1.0;
    }
    let peak = counts.iter().copied().fold(0.0, f64::max);
    counts.iter_mut().for_each(|c| *c /= peak);
    let centers = (0..bin_count).map(|i| lo + (i as f64 + 0.5) * width).collect();
    Ok((centers, counts))
}

/// Least-squares fit of `values` at `xs` by a degree-`degree` polynomial in
/// the rescaled coordinate of `domain`, solved with Householder QR.
pub fn fit_poly(xs: &[f64], values: &[f64], degree: usize, domain: (f64, f64)) -> Result<PolyFit> {
    if xs.len() != values.len() || xs.len() <= degree {
        return Err(Error::InvalidParams(format!(
            "{} samples cannot determine degree {degree}",
            xs.len()
        )));
    }
    if !(domain.0 < domain.1) {
        return Err(Error::ConstantSlice);
    }
    let proto = PolyFit {
        degree,
        coeffs: vec![0.0; degree + 1],
        domain,
    };
    let a = DMatrix::from_fn(xs.len(), degree + 1, |i, k| proto.to_unit(xs[i]).powi(k as i32));
    let b = DVector::from_column_slice(values);
    let qr = a.qr();
    let qtb = qr.q().transpose() * b;
    let coeffs = qr
        .r()
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::InvalidParams("rank-deficient design matrix".into()))?;
    PolyFit::new(coeffs.iter().copied().collect(), domain)
}

/// Histogram of the slice fitted by a polynomial. The domain is
/// `[min, max]` of the slice.
pub fn fit_histogram_poly(slice: &Slice, bin_count: usize, degree: usize) -> Result<PolyFit> {
    if bin_count <= degree {
        return Err(Error::InvalidParams(format!(
            "bin count {bin_count} must exceed degree {degree}"
        )));
    }
    let (centers, counts) = histogram(slice, bin_count)?;
    fit_poly(&centers, &counts, degree, (slice.min(), slice.max()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub intensity: f64,
    pub kind: ExtremumKind,
}

/// Critical points of the fit, sorted by intensity. Sign changes of the
/// derivative on a uniform grid are refined by bisection in the rescaled
/// coordinate.
pub fn find_extrema(fit: &PolyFit) -> Vec<Extremum> {
    let grid: Vec<f64> = (0..EXTREMA_GRID)
        .map(|i| -1.0 + 2.0 * i as f64 / (EXTREMA_GRID - 1) as f64)
        .collect();
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &t in &grid {
        let d = fit.deriv_unit(t);
        if d == 0.0 {
            continue;
        }
        if let Some((pt, pd)) = prev {
            if pd.signum() != d.signum() {
                let root = bisect(|u| fit.deriv_unit(u), pt, t, pd);
                out.push(Extremum {
                    intensity: fit.from_unit(root),
                    kind: if pd < 0.0 { ExtremumKind::Min } else { ExtremumKind::Max },
                });
            }
        }
        prev = Some((t, d));
    }
    out
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    let lo_sign = f_lo.signum();
    while hi - lo > EXTREMA_TOL {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if v.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramNormParams {
    pub bin_count: usize,
    pub poly_degree: usize,
    pub alpha: f64,
    /// First minimum `m`.
    pub m_intensity: f64,
    /// First maximum `M` above `m`.
    #[serde(rename = "M_intensity")]
    pub big_m_intensity: f64,
    /// Window width `w = α·Δ`.
    pub width: f64,
    /// `Δ = |M − m|`.
    pub delta: f64,
}

impl Default for HistogramNormParams {
    fn default() -> Self {
        HistogramNormParams {
            bin_count: DEFAULT_BINS,
            poly_degree: DEFAULT_DEGREE,
            alpha: DEFAULT_ALPHA,
            m_intensity: f64::NAN,
            big_m_intensity: f64::NAN,
            width: f64::NAN,
            delta: f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramNormOutput {
    pub slice: Slice,
    /// Settings plus the fitted `m`, `M`, `Δ`, `w` (NaN on fallback).
    pub params: HistogramNormParams,
    /// True when no (m, M) pair existed and percentile normalization was used.
    pub fallback: bool,
}

/// Histogram-based normalization; falls back to 2/98 percentile
/// normalization, flagged, when the fit has no minimum followed by a maximum.
pub fn normalize_histogram(slice: &Slice, params: &HistogramNormParams) -> Result<HistogramNormOutput> {
    if !(params.alpha > 0.0) || params.poly_degree < 2 {
        return Err(Error::InvalidParams(format!(
            "alpha {} / degree {}",
            params.alpha, params.poly_degree
        )));
    }
    let mut fitted = HistogramNormParams {
        m_intensity: f64::NAN,
        big_m_intensity: f64::NAN,
        width: f64::NAN,
        delta: f64::NAN,
        ..params.clone()
    };
    let pair = match fit_histogram_poly(slice, params.bin_count, params.poly_degree) {
        Ok(fit) => first_min_max(&find_extrema(&fit)),
        Err(Error::ConstantSlice) => None,
        Err(e) => return Err(e),
    };
    let Some((m, big_m)) = pair else {
        return Ok(HistogramNormOutput {
            slice: normalize_percentile(slice, 2.0, 98.0)?,
            params: fitted,
            fallback: true,
        });
    };
    let delta = (big_m - m).abs();
    let width = params.alpha * delta;
    let lo = big_m - width / 2.0;
    fitted.m_intensity = m;
    fitted.big_m_intensity = big_m;
    fitted.delta = delta;
    fitted.width = width;
    Ok(HistogramNormOutput {
        slice: slice.map(|x| ((x - lo) / width).clamp(0.0, 1.0))?,
        params: fitted,
        fallback: false,
    })
}

/// Lowest-intensity minimum and the lowest maximum above it.
fn first_min_max(extrema: &[Extremum]) -> Option<(f64, f64)> {
    let m = extrema.iter().find(|e| e.kind == ExtremumKind::Min)?.intensity;
    let big_m = extrema
        .iter()
        .find(|e| e.kind == ExtremumKind::Max && e.intensity > m)?
        .intensity;
    (big_m > m).then_some((m, big_m))
}
