//! k-space sampling masks.
//!
//! Three pattern families, all defined in DC-centered coordinates:
//!
//! * `fastmri`: full columns, a fixed central band plus uniformly drawn
//!   outer columns (the only stochastic pattern).
//! * `radial`: diameters through DC at uniformly spaced angles.
//! * `spiral`: Archimedean arms `r = b·θ` from DC out to the corner radius.
//!
//! Radial and spiral masks hit the requested pixel count exactly; fastmri
//! masks hit the requested column count exactly. All count rounding is
//! round-half-up.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgio::{checked_pixels, pack_row_msb, parse_netpbm_header, unpack_row_msb};

/// Accelerations the toolkit sweeps by default, ×2 … ×64.
pub const SUPPORTED_ACCELERATIONS: [u32; 6] = [2, 4, 8, 16, 32, 64];

pub const DEFAULT_CENTER_FRACTION: f64 = 0.08;

const MAX_PITCH_BISECTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Fastmri,
    Radial,
    Spiral,
    Unknown,
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::Fastmri => "fastmri",
            Pattern::Radial => "radial",
            Pattern::Spiral => "spiral",
            Pattern::Unknown => "unknown",
        })
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fastmri" => Ok(Pattern::Fastmri),
            "radial" => Ok(Pattern::Radial),
            "spiral" => Ok(Pattern::Spiral),
            _ => Err(Error::UnknownKind(s.to_string())),
        }
    }
}

/// Generator parameters recorded alongside each mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaskParams {
    Fastmri { center_fraction: f64 },
    Radial { spoke_count: usize, angle_offset: f64 },
    Spiral { arm_count: usize, pitch: f64 },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskMeta {
    pub pattern: Pattern,
    pub target_fraction: f64,
    pub achieved_fraction: f64,
    pub seed: u64,
    pub params: MaskParams,
}

/// Boolean sampling pattern over a centered spectrum; `true` = acquired.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
    meta: MaskMeta,
}

impl Mask {
    /// Wraps raw bits; the achieved fraction in `meta` is recomputed.
    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>, mut meta: MaskMeta) -> Result<Self> {
        if height == 0 || width == 0 || bits.len() != height * width {
            return Err(Error::InvalidParams(format!(
                "mask {height}x{width} with {} bits",
                bits.len()
            )));
        }
        meta.achieved_fraction = bits.iter().filter(|&&b| b).count() as f64 / bits.len() as f64;
        Ok(Mask {
            height,
            width,
            bits,
            meta,
        })
    }

    /// All-true mask with no generator metadata.
    pub fn full(height: usize, width: usize) -> Self {
        Mask::from_bits(
            height,
            width,
            vec![true; height * width],
            MaskMeta {
                pattern: Pattern::Unknown,
                target_fraction: 1.0,
                achieved_fraction: 1.0,
                seed: 0,
                params: MaskParams::None,
            },
        )
        .expect("valid dims")
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

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn meta(&self) -> &MaskMeta {
        &self.meta
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_dc_sampled(&self) -> bool {
        self.get(self.height / 2, self.width / 2)
    }

    /// Columns whose every bit is set.
    pub fn full_columns(&self) -> Vec<usize> {
        (0..self.width)
            .filter(|&c| (0..self.height).all(|r| self.get(r, c)))
            .collect()
    }

    /// Bits packed MSB-first per row, the same bytes as the PBM raster.
    pub fn packed_bits(&self) -> Vec<u8> {
        self.bits.chunks(self.width).flat_map(pack_row_msb).collect()
    }

    /// PBM (P4) file bytes.
    pub fn to_pbm(&self) -> Vec<u8> {
        let mut bytes = format!("P4\n{} {}\n", self.width, self.height).into_bytes();
        bytes.extend(self.packed_bits());
        bytes
    }
}

/// Round-half-up count; the slack absorbs representation error in products
/// like `0.08 * 320`.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

/// Fraction of k-space kept for an ×`accel` acceleration; `downscale` only
/// feeds the validity check, the per-mask fraction is always `1 / accel`.
pub fn accel_to_fraction(accel: u32, downscale: u32) -> Result<f64> {
    if accel == 0 || downscale == 0 {
        return Err(Error::ZeroAcceleration);
    }
    Ok(1.0 / accel as f64)
}

/// Total acceleration of a low-resolution + undersampled acquisition.
pub fn total_accel(downscale: u32, undersample_accel: u32) -> u64 {
    (downscale as u64).pow(2) * undersample_accel as u64
}

fn check_fraction(fraction: f64, max: f64) -> Result<()> {
    let full = fraction == 1.0;
    if !fraction.is_finite() || fraction <= 0.0 || (fraction > max && !full) {
        return Err(Error::FractionOutOfRange(fraction));
    }
    Ok(())
}

fn check_geometry(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidParams(format!(
            "mask dims must be positive, got {height}x{width}"
        )));
    }
    checked_pixels(height as u64, width as u64).map(|_| ())
}

/// Column-structured cartesian mask: `round(center_fraction·W)` central
/// columns plus `round(fraction·W) - n_center` columns drawn without
/// replacement from the rest with a ChaCha8 generator seeded by `seed`.
pub fn make_fastmri_mask(height: usize, width: usize, fraction: f64, center_fraction: f64, seed: u64) -> Result<Mask> {
    check_geometry(height, width)?;
    check_fraction(fraction, 1.0)?;
    if !(center_fraction > 0.0 && center_fraction <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "center fraction {center_fraction} out of (0, 1]"
        )));
    }
    let n_cols = round_half_up(fraction * width as f64).min(width);
    let n_center = round_half_up(center_fraction * width as f64).min(width);
    if n_cols < n_center {
        return Err(Error::FractionBelowCenter {
            fraction,
            needed: n_cols,
            center: n_center,
        });
    }

    let start = width / 2 - n_center / 2;
    let mut columns = vec![false; width];
    columns[start..start + n_center].iter_mut().for_each(|c| *c = true);
    let outer: Vec<usize> = (0..width).filter(|&c| !columns[c]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in rand::seq::index::sample(&mut rng, outer.len(), n_cols - n_center) {
        columns[outer[i]] = true;
    }

    let bits = (0..height).flat_map(|_| columns.iter().copied()).collect();
    Mask::from_bits(
        height,
        width,
        bits,
        MaskMeta {
            pattern: Pattern::Fastmri,
            target_fraction: fraction,
            achieved_fraction: 0.0,
            seed,
            params: MaskParams::Fastmri { center_fraction },
        },
    )
}

/// Centered offsets `(dy, dx)` of a flat pixel index.
#[inline]
fn offsets(idx: usize, height: usize, width: usize) -> (i64, i64) {
    (
        (idx / width) as i64 - (height / 2) as i64,
        (idx % width) as i64 - (width / 2) as i64,
    )
}

/// Supercover membership: the line through DC at angle `theta` meets the
/// unit pixel square centered at `(dy, dx)`. Exactly symmetric under
/// `(dy, dx) -> (-dy, -dx)`.
#[inline]
fn on_spoke(dy: i64, dx: i64, sin: f64, cos: f64) -> bool {
    let dist = dx as f64 * sin - dy as f64 * cos;
    dist.abs() <= 0.5 * (sin.abs() + cos.abs()) + 1e-9
}

/// Flat indices of one full diameter at angle `theta`, edge to edge.
pub fn spoke_pixels(height: usize, width: usize, theta: f64) -> Vec<usize> {
    let (sin, cos) = theta.sin_cos();
    let (ch, cw) = ((height / 2) as i64, (width / 2) as i64);
    let mut out = Vec::new();
    let mut push = |dy: i64, dx: i64| {
        let (r, c) = (dy + ch, dx + cw);
        if r >= 0 && c >= 0 && (r as usize) < height && (c as usize) < width && on_spoke(dy, dx, sin, cos) {
            out.push(r as usize * width + c as usize);
        }
    };
    if cos.abs() >= sin.abs() {
        // Mostly horizontal: a few candidate rows per column.
        for dx in -cw..(width as i64 - cw) {
            let mid = dx as f64 * sin / cos;
            let lo = mid.floor() as i64 - 2;
            for dy in lo..=lo + 5 {
                push(dy, dx);
            }
        }
    } else {
        for dy in -ch..(height as i64 - ch) {
            let mid = dy as f64 * cos / sin;
            let lo = mid.floor() as i64 - 2;
            for dx in lo..=lo + 5 {
                push(dy, dx);
            }
        }
    }
    out
}

/// Union of `count` uniformly spaced spokes starting at `angle_offset`.
pub fn radial_spoke_union(height: usize, width: usize, count: usize, angle_offset: f64) -> Vec<bool> {
    let mut bits = vec![false; height * width];
    for i in 0..count {
        for idx in spoke_pixels(height, width, angle_offset + i as f64 * PI / count as f64) {
            bits[idx] = true;
        }
    }
    bits
}

fn by_radius(height: usize, width: usize) -> impl Fn(&usize, &usize) -> std::cmp::Ordering {
    move |&a, &b| {
        let r2 = |i| {
            let (dy, dx) = offsets(i, height, width);
            dy * dy + dx * dx
        };
        r2(a).cmp(&r2(b)).then(a.cmp(&b))
    }
}

/// Radial mask with exactly `round(fraction·H·W)` pixels.
///
/// The spoke count `n` is raised until the union of `n` uniform spokes would
/// exceed the target. The shortfall is filled from interleaved spokes at
/// `offset + (i + ½)·π/n`, nearest-to-DC pixels first.
pub fn make_radial_mask(height: usize, width: usize, fraction: f64, angle_offset: f64) -> Result<Mask> {
    check_geometry(height, width)?;
    check_fraction(fraction, 0.5)?;
    if !angle_offset.is_finite() {
        return Err(Error::InvalidParams("angle offset must be finite".into()));
    }
    let total = height * width;
    let meta = |spoke_count| MaskMeta {
        pattern: Pattern::Radial,
        target_fraction: fraction,
        achieved_fraction: 0.0,
        seed: 0,
        params: MaskParams::Radial {
            spoke_count,
            angle_offset,
        },
    };
    if fraction == 1.0 {
        return Mask::from_bits(height, width, vec![true; total], meta(0));
    }
    let target = round_half_up(fraction * total as f64);

    let mut spokes = 0usize;
    let mut bits = vec![false; total];
    loop {
        let next = radial_spoke_union(height, width, spokes + 1, angle_offset);
        let count = next.iter().filter(|&&b| b).count();
        if count > target {
            break;
        }
        spokes += 1;
        bits = next;
        if count == target || count == total {
            break;
        }
    }

    let mut have = bits.iter().filter(|&&b| b).count();
    let extra_angles: Vec<f64> = if spokes == 0 {
        vec![angle_offset]
    } else {
        (0..spokes)
            .map(|i| angle_offset + (i as f64 + 0.5) * PI / spokes as f64)
            .collect()
    };
    let order = by_radius(height, width);
    for theta in extra_angles {
        if have == target {
            break;
        }
        let mut fresh: Vec<usize> = spoke_pixels(height, width, theta)
            .into_iter()
            .filter(|&i| !bits[i])
            .collect();
        fresh.sort_by(&order);
        for i in fresh.into_iter().take(target - have) {
            bits[i] = true;
            have += 1;
        }
    }
    if have < target {
        let mut rest: Vec<usize> = (0..total).filter(|&i| !bits[i]).collect();
        rest.sort_by(&order);
        for i in rest.into_iter().take(target - have) {
            bits[i] = true;
        }
    }
    Mask::from_bits(height, width, bits, meta(spokes))
}

/// Distinct pixels visited by an Archimedean spiral, in traversal order.
///
/// Each arm follows `r = pitch·θ` from DC to the corner radius; arm `a` is
/// rotated by `2πa / arms`. The angular step bounds the arc length between
/// consecutive samples by half a pixel. Arms are interleaved step by step.
pub fn spiral_trajectory(height: usize, width: usize, pitch: f64, arms: usize) -> Vec<usize> {
    let r_max = ((height as f64 / 2.0).powi(2) + (width as f64 / 2.0).powi(2)).sqrt();
    let theta_max = r_max / pitch;
    let step = 0.5 / (r_max * r_max + pitch * pitch).sqrt();
    let steps = (theta_max / step).ceil() as usize;
    let (ch, cw) = ((height / 2) as i64, (width / 2) as i64);
    let mut seen = vec![false; height * width];
    let mut order = Vec::new();
    for k in 0..=steps {
        let theta = (k as f64 * step).min(theta_max);
        let r = pitch * theta;
        for a in 0..arms {
            let (s, c) = (theta + 2.0 * PI * a as f64 / arms as f64).sin_cos();
            let row = ch + (r * s).round() as i64;
            let col = cw + (r * c).round() as i64;
            if row < 0 || col < 0 || row as usize >= height || col as usize >= width {
                continue;
            }
            let idx = row as usize * width + col as usize;
            if !seen[idx] {
                seen[idx] = true;
                order.push(idx);
            }
        }
    }
    order
}

/// Spiral mask with exactly `round(fraction·H·W)` pixels.
///
/// The pitch is bisected so the trajectory covers at least the target, then
/// the outermost trajectory pixels are dropped in reverse traversal order.
pub fn make_spiral_mask(height: usize, width: usize, fraction: f64, arm_count: usize) -> Result<Mask> {
    check_geometry(height, width)?;
    check_fraction(fraction, 0.5)?;
    if arm_count == 0 {
        return Err(Error::InvalidParams("arm count must be positive".into()));
    }
    let total = height * width;
    let meta = |pitch| MaskMeta {
        pattern: Pattern::Spiral,
        target_fraction: fraction,
        achieved_fraction: 0.0,
        seed: 0,
        params: MaskParams::Spiral { arm_count, pitch },
    };
    if fraction == 1.0 {
        return Mask::from_bits(height, width, vec![true; total], meta(0.0));
    }
    if height < 8 || width < 8 {
        return Err(Error::BisectionFailure(format!("grid {height}x{width} is below 8x8")));
    }
    let target = round_half_up(fraction * total as f64);
    let pitch = find_spiral_pitch(height, width, target, arm_count)?;
    let mut order = spiral_trajectory(height, width, pitch, arm_count);
    order.truncate(target);
    let mut bits = vec![false; total];
    for i in order {
        bits[i] = true;
    }
    Mask::from_bits(height, width, bits, meta(pitch))
}

/// Largest pitch found by bisection whose trajectory still covers `target`
/// pixels. Coverage falls as the pitch grows.
pub fn find_spiral_pitch(height: usize, width: usize, target: usize, arms: usize) -> Result<f64> {
    let r_max = ((height as f64 / 2.0).powi(2) + (width as f64 / 2.0).powi(2)).sqrt();
    let cover = |pitch: f64| spiral_trajectory(height, width, pitch, arms).len();
    // Adjacent passes 0.9 px apart: essentially the full grid.
    let mut lo = 0.9 * arms as f64 / (2.0 * PI);
    let mut hi = r_max;
    let lo_cover = cover(lo);
    if lo_cover < target {
        return Err(Error::BisectionFailure(format!(
            "densest spiral covers {lo_cover} pixels, need {target}"
        )));
    }
    if cover(hi) >= target {
        return Ok(hi);
    }
    for _ in 0..MAX_PITCH_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let c = cover(mid);
        if c >= target {
            lo = mid;
            if c - target <= 1 {
                break;
            }
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(lo)
}

/// On-disk sidecar next to the PBM raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    pattern: Pattern,
    height: usize,
    width: usize,
    target_fraction: f64,
    achieved_fraction: f64,
    seed: u64,
    params: MaskParams,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes the mask as PBM (P4) and its metadata as a JSON sidecar with the
/// same basename.
pub fn write_mask(mask: &Mask, path: &Path) -> Result<()> {
    fs::write(path, mask.to_pbm())?;
    let sidecar = Sidecar {
        pattern: mask.meta.pattern,
        height: mask.height,
        width: mask.width,
        target_fraction: mask.meta.target_fraction,
        achieved_fraction: mask.meta.achieved_fraction,
        seed: mask.meta.seed,
        params: mask.meta.params.clone(),
    };
    let mut json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::MalformedSidecar(e.to_string()))?;
    json.push('\n');
    fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// Reads a PBM mask. Without a sidecar the pattern is `unknown` and both
/// fractions are the measured popcount fraction.
pub fn read_mask(path: &Path) -> Result<Mask> {
    let bytes = fs::read(path)?;
    let (magic, width, height, _, offset) = parse_netpbm_header(&bytes)?;
    if magic != b"P4" {
        return Err(Error::MalformedHeader(format!(
            "expected P4, got '{}'",
            String::from_utf8_lossy(magic)
        )));
    }
    let n = checked_pixels(height, width)?;
    let (h, w) = (height as usize, width as usize);
    let row_bytes = w.div_ceil(8);
    let raster = &bytes[offset..];
    if raster.len() < row_bytes * h {
        return Err(Error::MalformedHeader("truncated PBM raster".into()));
    }
    let mut bits = Vec::with_capacity(n);
    for row in raster[..row_bytes * h].chunks_exact(row_bytes) {
        bits.extend(unpack_row_msb(row, w));
    }

    let side = sidecar_path(path);
    let meta = if side.exists() {
        let text = fs::read_to_string(&side)?;
        let sc: Sidecar = serde_json::from_str(&text).map_err(|e| Error::MalformedSidecar(e.to_string()))?;
        if (sc.height, sc.width) != (h, w) {
            return Err(Error::MalformedSidecar(format!(
                "sidecar says {}x{}, raster is {h}x{w}",
                sc.height, sc.width
            )));
        }
        MaskMeta {
            pattern: sc.pattern,
            target_fraction: sc.target_fraction,
            achieved_fraction: sc.achieved_fraction,
            seed: sc.seed,
            params: sc.params,
        }
    } else {
        let f = bits.iter().filter(|&&b| b).count() as f64 / n as f64;
        MaskMeta {
            pattern: Pattern::Unknown,
            target_fraction: f,
            achieved_fraction: f,
            seed: 0,
            params: MaskParams::None,
        }
    };
    Mask::from_bits(h, w, bits, meta)
}
