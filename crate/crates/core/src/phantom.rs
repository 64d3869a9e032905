//! Synthetic test slices standing in for acquired MR data.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slice::Slice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    SheppLogan,
    BimodalField,
    Ramp,
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "shepp_logan" => Ok(PhantomKind::SheppLogan),
            "bimodal_field" => Ok(PhantomKind::BimodalField),
            "ramp" => Ok(PhantomKind::Ramp),
            _ => Err(Error::UnknownKind(s.to_string())),
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhantomKind::SheppLogan => "shepp_logan",
            PhantomKind::BimodalField => "bimodal_field",
            PhantomKind::Ramp => "ramp",
        })
    }
}

/// Generates a square `size`×`size` phantom. Deterministic.
pub fn make_phantom(kind: PhantomKind, size: usize) -> Result<Slice> {
    if size < 8 {
        return Err(Error::InvalidParams(format!("phantom size must be >= 8, got {size}")));
    }
    match kind {
        PhantomKind::SheppLogan => Ok(shepp_logan(size)),
        PhantomKind::BimodalField => Ok(bimodal_field(size)),
        PhantomKind::Ramp => Ok(ramp(size, size)),
    }
}

/// Row-major linear ramp from 0 to 1 over all pixels.
pub fn ramp(height: usize, width: usize) -> Slice {
    let n = height * width;
    let denom = (n.max(2) - 1) as f64;
    Slice::from_fn(height, width, |r, c| (r * width + c) as f64 / denom).expect("finite ramp")
}

/// Modified Shepp–Logan ellipses: (intensity, semi-axis a, semi-axis b, x0, y0, angle in degrees).
pub const SHEPP_LOGAN_ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
];

/// Pixel centers map to x ∈ (-1, 1) left to right and y ∈ (-1, 1) bottom to top.
fn shepp_logan(size: usize) -> Slice {
    let n = size as f64;
    let raw = Slice::from_fn(size, size, |r, c| {
        let x = (2.0 * c as f64 + 1.0) / n - 1.0;
        let y = 1.0 - (2.0 * r as f64 + 1.0) / n;
        let v: f64 = SHEPP_LOGAN_ELLIPSES
            .iter()
            .filter(|&&(_, a, b, x0, y0, deg)| {
                let (s, co) = deg.to_radians().sin_cos();
                let dx = x - x0;
                let dy = y - y0;
                let u = dx * co + dy * s;
                let w = -dx * s + dy * co;
                (u / a).powi(2) + (w / b).powi(2) <= 1.0
            })
            .map(|e| e.0)
            .sum();
        // 1 - 0.8 - 0.2 lands a hair below zero in floating point.
        v.max(0.0)
    })
    .expect("finite phantom");
    let max = raw.max();
    raw.map(|v| v / max).expect("finite phantom")
}

/// Mixture density with modes at 0.1 and 0.6, truncated to [0, 1].
fn bimodal_density(x: f64) -> f64 {
    let g = |mu: f64, sigma: f64| (-0.5 * ((x - mu) / sigma).powi(2)).exp() / sigma;
    0.4 * g(0.1, 0.07) + 0.6 * g(0.6, 0.12)
}

/// Intensities follow [`bimodal_density`] exactly (quantile assignment by
/// rank); the spatial layout is a textured disk of "tissue" on background.
fn bimodal_field(size: usize) -> Slice {
    const GRID: usize = 20_000;
    let xs: Vec<f64> = (0..=GRID).map(|i| i as f64 / GRID as f64).collect();
    let mut cdf = vec![0.0; GRID + 1];
    for i in 1..=GRID {
        cdf[i] = cdf[i - 1] + 0.5 * (bimodal_density(xs[i - 1]) + bimodal_density(xs[i])) / GRID as f64;
    }
    let total = cdf[GRID];
    cdf.iter_mut().for_each(|v| *v /= total);
    let quantile = |u: f64| -> f64 {
        let hi = cdf.partition_point(|&c| c < u).clamp(1, GRID);
        let lo = hi - 1;
        let span = cdf[hi] - cdf[lo];
        let t = if span > 0.0 { (u - cdf[lo]) / span } else { 0.0 };
        xs[lo] + t * (xs[hi] - xs[lo])
    };

    let n = size * size;
    let half = size as f64 / 2.0;
    let score: Vec<f64> = (0..n)
        .map(|i| {
            let (r, c) = ((i / size) as f64 + 0.5 - half, (i % size) as f64 + 0.5 - half);
            let radius = (r * r + c * c).sqrt() / half;
            let theta = r.atan2(c);
            -radius + 0.08 * (5.0 * theta).sin() + 0.03 * (0.4 * r).sin() * (0.3 * c).cos()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
    let mut pixels = vec![0.0; n];
    for (rank, &idx) in order.iter().enumerate() {
        pixels[idx] = quantile((rank as f64 + 0.5) / n as f64);
    }
    Slice::new(size, size, pixels).expect("finite phantom")
}
