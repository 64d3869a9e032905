//! Image-quality metrics and μ ± σ aggregation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slice::Slice;

pub const DEFAULT_K1: f64 = 0.01;
pub const DEFAULT_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsimMode {
    /// One evaluation of the formula over whole-image moments.
    #[default]
    Global,
    /// Mean of per-pixel SSIM under a sliding window.
    Windowed,
}

impl fmt::Display for SsimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SsimMode::Global => "global",
            SsimMode::Windowed => "windowed",
        })
    }
}

impl FromStr for SsimMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(SsimMode::Global),
            "windowed" => Ok(SsimMode::Windowed),
            _ => Err(Error::UnknownKind(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    #[default]
    Gaussian,
    Uniform,
}

/// How windows near the border are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    /// Mirror with edge repeat (`...c b a | a b c...`); one SSIM value per pixel.
    #[default]
    Symmetric,
    /// Only window positions fully inside the image.
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    /// Total intensity range L.
    pub data_range: f64,
    pub mode: SsimMode,
    pub window_size: usize,
    pub window_sigma: f64,
    pub window: WindowKind,
    pub edge: EdgeMode,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            k1: DEFAULT_K1,
            k2: DEFAULT_K2,
            data_range: 1.0,
            mode: SsimMode::Global,
            window_size: 11,
            window_sigma: 1.5,
            window: WindowKind::Gaussian,
            edge: EdgeMode::Symmetric,
        }
    }
}

impl SsimParams {
    pub fn windowed() -> Self {
        SsimParams {
            mode: SsimMode::Windowed,
            ..Default::default()
        }
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.data_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.data_range).powi(2)
    }

    fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.data_range > 0.0) {
            return Err(Error::InvalidParams("k1, k2 and L must be positive".into()));
        }
        if self.mode == SsimMode::Windowed && (self.window_size < 3 || self.window_size.is_multiple_of(2)) {
            return Err(Error::InvalidParams(format!(
                "window size must be odd and >= 3, got {}",
                self.window_size
            )));
        }
        if self.window == WindowKind::Gaussian && !(self.window_sigma > 0.0) {
            return Err(Error::InvalidParams("window sigma must be positive".into()));
        }
        Ok(())
    }

    /// Normalized 1D window; the 2D window is its outer product.
    fn kernel(&self) -> Vec<f64> {
        let n = self.window_size;
        let half = (n / 2) as f64;
        let raw: Vec<f64> = match self.window {
            WindowKind::Uniform => vec![1.0; n],
            WindowKind::Gaussian => (0..n)
                .map(|i| (-(i as f64 - half).powi(2) / (2.0 * self.window_sigma.powi(2))).exp())
                .collect(),
        };
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / sum).collect()
    }
}

/// Per-pair quality report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IqReport {
    pub mse: f64,
    /// dB; `f64::INFINITY` when `mse == 0`.
    pub psnr: f64,
    pub ssim: f64,
}

/// Mean squared error over all pixels.
pub fn mse(x: &Slice, y: &Slice) -> Result<f64> {
    x.ensure_same_dims(y)?;
    let sum: f64 = x.pixels().iter().zip(y.pixels()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / x.len() as f64)
}

/// 10·log10(max²/mse), or +∞ for identical images.
pub fn psnr_from_mse(mse: f64, max_value: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (max_value * max_value / mse).log10()
    }
}

pub fn psnr(x: &Slice, y: &Slice, max_value: f64) -> Result<f64> {
    Ok(psnr_from_mse(mse(x, y)?, max_value))
}

fn ssim_formula(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

/// Structural similarity. Global mode uses population moments of the whole
/// image; windowed mode averages the same formula over local windows.
pub fn ssim(x: &Slice, y: &Slice, params: &SsimParams) -> Result<f64> {
    x.ensure_same_dims(y)?;
    params.validate()?;
    match params.mode {
        SsimMode::Global => Ok(ssim_global(x, y, params)),
        SsimMode::Windowed => ssim_windowed(x, y, params),
    }
}

fn ssim_global(x: &Slice, y: &Slice, p: &SsimParams) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.mean(), y.mean());
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.pixels().iter().zip(y.pixels()) {
        let (da, db) = (a - mx, b - my);
        vx += da * da;
        vy += db * db;
        cxy += da * db;
    }
    ssim_formula(mx, my, vx / n, vy / n, cxy / n, p.c1(), p.c2())
}

/// Index into `0..n` after symmetric reflection of `i`.
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Separable weighted filtering. Output covers every pixel for
/// `Symmetric`, only interior positions for `Valid`.
fn filter2(data: &[f64], h: usize, w: usize, kernel: &[f64], edge: EdgeMode) -> (Vec<f64>, usize, usize) {
    let k = kernel.len();
    let half = (k / 2) as i64;
    let (oh, ow, off) = match edge {
        EdgeMode::Symmetric => (h, w, -half),
        EdgeMode::Valid => (h + 1 - k, w + 1 - k, 0),
    };
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for j in 0..ow {
            let mut acc = 0.0;
            for (t, &wt) in kernel.iter().enumerate() {
                acc += wt * data[r * w + reflect(j as i64 + off + t as i64, w)];
            }
            rows[r * ow + j] = acc;
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            let mut acc = 0.0;
            for (t, &wt) in kernel.iter().enumerate() {
                acc += wt * rows[reflect(i as i64 + off + t as i64, h) * ow + j];
            }
            out[i * ow + j] = acc;
        }
    }
    (out, oh, ow)
}

fn ssim_windowed(x: &Slice, y: &Slice, p: &SsimParams) -> Result<f64> {
    let (h, w) = x.dims();
    if p.window_size > h || p.window_size > w {
        return Err(Error::WindowTooLarge {
            window: p.window_size,
            height: h,
            width: w,
        });
    }
    let kernel = p.kernel();
    let xs = x.pixels();
    let ys = y.pixels();
    let xx: Vec<f64> = xs.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = ys.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = xs.iter().zip(ys).map(|(a, b)| a * b).collect();
    let (mx, _, _) = filter2(xs, h, w, &kernel, p.edge);
    let (my, _, _) = filter2(ys, h, w, &kernel, p.edge);
    let (sxx, _, _) = filter2(&xx, h, w, &kernel, p.edge);
    let (syy, _, _) = filter2(&yy, h, w, &kernel, p.edge);
    let (sxy, _, _) = filter2(&xy, h, w, &kernel, p.edge);
    let (c1, c2) = (p.c1(), p.c2());
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (a, b) = (mx[i], my[i]);
            ssim_formula(a, b, sxx[i] - a * a, syy[i] - b * b, sxy[i] - a * b, c1, c2)
        })
        .sum();
    Ok(total / mx.len() as f64)
}

/// All three metrics for one (reference, test) pair.
pub fn evaluate(reference: &Slice, test: &Slice, params: &SsimParams, max_value: f64) -> Result<IqReport> {
    let m = mse(reference, test)?;
    Ok(IqReport {
        mse: m,
        psnr: psnr_from_mse(m, max_value),
        ssim: ssim(reference, test, params)?,
    })
}

/// Display scaling applied when rendering table values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleHint {
    #[default]
    Raw,
    /// MSE shown ×10⁴.
    MseE4,
    /// SSIM shown ×10².
    SsimE2,
}

impl ScaleHint {
    pub fn factor(self) -> f64 {
        match self {
            ScaleHint::Raw => 1.0,
            ScaleHint::MseE4 => 1e4,
            ScaleHint::SsimE2 => 1e2,
        }
    }
}

/// Mean and population standard deviation of a metric over a set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    pub scale_hint: ScaleHint,
}

impl Aggregate {
    pub fn with_hint(mut self, hint: ScaleHint) -> Self {
        self.scale_hint = hint;
        self
    }

    /// Table-style `μ ± σ` with two decimals after applying the hint.
    pub fn render(&self) -> String {
        let f = self.scale_hint.factor();
        format!("{} ± {}", render_2dp(self.mean * f), render_2dp(self.std * f))
    }

    pub fn render_mean(&self) -> String {
        render_2dp(self.mean * self.scale_hint.factor())
    }
}

fn render_2dp(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.2}")
    }
}

/// Mean and population (divisor n) standard deviation. Any +∞ entry makes
/// the mean +∞; the std is then 0 if every entry is +∞ and +∞ otherwise.
pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = values.len();
    if values.iter().any(|v| v.is_infinite()) {
        let all_same = values.iter().all(|&v| v == values[0]);
        return Ok(Aggregate {
            mean: values.iter().sum::<f64>() / n as f64,
            std: if all_same { 0.0 } else { f64::INFINITY },
            n,
            scale_hint: ScaleHint::Raw,
        });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(Aggregate {
        mean,
        std: var.sqrt(),
        n,
        scale_hint: ScaleHint::Raw,
    })
}
