//! Degradation sweep over a slice corpus.
//!
//! For each (pattern, acceleration) cell one mask is generated per distinct
//! acquisition size, every prepared slice is degraded and scored against
//! its ground truth, and the per-slice metrics are aggregated into
//! `μ ± σ` rows. Slices are scored in parallel but aggregated in corpus
//! order, so the CSV does not depend on the thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::imgio::read_slice_auto;
use crate::masks::{
    accel_to_fraction, make_fastmri_mask, make_radial_mask, make_spiral_mask, total_accel, Mask, Pattern,
    DEFAULT_CENTER_FRACTION, SUPPORTED_ACCELERATIONS,
};
use crate::metrics::{aggregate, evaluate, IqReport, SsimMode, SsimParams};
use crate::normalize::{normalize_histogram, normalize_percentile, HistogramNormParams, Normalization};
use crate::phantom::{make_phantom, PhantomKind};
use crate::pipeline::{degrade, downscale, DegradePath, DegradeSpec, DownscaleMethod, Recon};
use crate::slice::Slice;

pub const CSV_HEADER: &str = "pattern,fraction,total_acceleration,path,metric,mean,std,n";
pub const THREADS_ENV: &str = "KSIM_THREADS";

const RADIAL_ANGLE_OFFSET: f64 = 0.0;
const SPIRAL_ARMS: usize = 1;
const LOWRES_PATTERN: &str = "none";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomEntry {
    pub kind: PhantomKind,
    pub size: usize,
}

/// Where the ground-truth slices come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorpusSpec {
    /// Every `*.pgm` and `*.ksim` file in the directory, sorted by name.
    Directory {
        directory: PathBuf,
    },
    Phantoms {
        phantoms: Vec<PhantomEntry>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub corpus: CorpusSpec,
    #[serde(default)]
    pub patterns: Vec<Pattern>,
    #[serde(default)]
    pub accelerations: Vec<u32>,
    #[serde(default = "default_downscale")]
    pub downscale: usize,
    #[serde(default = "default_path")]
    pub path: DegradePath,
    /// Defaults to zero-filled, plus bicubic upscaling when `downscale > 1`.
    #[serde(default)]
    pub recon: Option<Recon>,
    #[serde(default)]
    pub downscale_method: DownscaleMethod,
    #[serde(default = "default_normalization")]
    pub normalization: Normalization,
    #[serde(default)]
    pub ssim_mode: SsimMode,
    #[serde(default)]
    pub seed: u64,
    /// Draw a fresh fastmri mask per slice with seed `seed + index`.
    #[serde(default)]
    pub per_slice_seed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Worker threads; 0 = one per core. Falls back to `KSIM_THREADS`.
    /// Not echoed into the CSV.
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
}

fn default_downscale() -> usize {
    1
}

fn default_path() -> DegradePath {
    DegradePath::Undersample
}

fn default_normalization() -> Normalization {
    Normalization::None
}

impl BenchConfig {
    pub fn new(corpus: CorpusSpec, patterns: Vec<Pattern>, accelerations: Vec<u32>) -> Self {
        BenchConfig {
            corpus,
            patterns,
            accelerations,
            downscale: default_downscale(),
            path: default_path(),
            recon: None,
            downscale_method: DownscaleMethod::default(),
            normalization: default_normalization(),
            ssim_mode: SsimMode::default(),
            seed: 0,
            per_slice_seed: false,
            output: None,
            threads: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn effective_recon(&self) -> Recon {
        self.recon.unwrap_or(if self.downscale > 1 {
            Recon::ZeroFilledPlusBicubic
        } else {
            Recon::ZeroFilled
        })
    }

    pub fn validate(&self) -> Result<()> {
        if ![1, 2, 4].contains(&self.downscale) {
            return Err(Error::InvalidConfig(format!(
                "downscale {} not in {{1, 2, 4}}",
                self.downscale
            )));
        }
        if self.path == DegradePath::Undersample && self.downscale != 1 {
            return Err(Error::InvalidConfig("undersample path requires downscale 1".into()));
        }
        if self.path == DegradePath::Lowres {
            return Ok(());
        }
        if self.patterns.is_empty() || self.accelerations.is_empty() {
            return Err(Error::InvalidConfig(
                "patterns and accelerations must be non-empty".into(),
            ));
        }
        if let Some(p) = self.patterns.iter().find(|p| **p == Pattern::Unknown) {
            return Err(Error::InvalidConfig(format!("pattern {p} cannot be generated")));
        }
        if let Some(a) = self
            .accelerations
            .iter()
            .find(|a| **a != 1 && !SUPPORTED_ACCELERATIONS.contains(a))
        {
            return Err(Error::InvalidConfig(format!("acceleration {a} not supported")));
        }
        Ok(())
    }

    fn threads(&self) -> usize {
        self.threads.unwrap_or_else(|| {
            std::env::var(THREADS_ENV)
                .ok()
                .and_then(|v| v.trim().parse().ok())
                .unwrap_or(0)
        })
    }
}

/// One named corpus item; unreadable items carry their error.
#[derive(Debug)]
pub struct CorpusEntry {
    pub name: String,
    pub slice: Result<Slice>,
}

impl CorpusEntry {
    pub fn new(name: impl Into<String>, slice: Result<Slice>) -> Self {
        CorpusEntry {
            name: name.into(),
            slice,
        }
    }
}

pub fn load_corpus(spec: &CorpusSpec) -> Result<Vec<CorpusEntry>> {
    match spec {
        CorpusSpec::Phantoms { phantoms } => Ok(phantoms
            .iter()
            .map(|p| CorpusEntry::new(format!("{}_{}", p.kind, p.size), make_phantom(p.kind, p.size)))
            .collect()),
        CorpusSpec::Directory { directory } => {
            let mut paths = Vec::new();
            for entry in fs::read_dir(directory)? {
                let path = entry?.path();
                let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
                if path.is_file() && matches!(ext.as_deref(), Some("pgm" | "ksim")) {
                    paths.push(path);
                }
            }
            paths.sort();
            Ok(paths
                .into_iter()
                .map(|p| {
                    let name = p
                        .file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    CorpusEntry::new(name, read_slice_auto(&p))
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub pattern: String,
    pub fraction: f64,
    pub total_acceleration: u64,
    pub path: DegradePath,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedSlice {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskRecord {
    pub pattern: Pattern,
    pub fraction: f64,
    pub height: usize,
    pub width: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub slices_read: usize,
    pub slices_skipped: usize,
    pub skipped: Vec<SkippedSlice>,
    pub histogram_fallbacks: usize,
    pub masks: Vec<MaskRecord>,
    pub notes: Vec<String>,
    pub csv: String,
}

/// A ground-truth slice after normalization, with its low-resolution
/// reference when the path produces low-resolution output.
struct Prepared {
    truth: Slice,
    low_reference: Option<Slice>,
}

/// Loads the configured corpus, runs the sweep and writes the CSV to
/// `config.output` when set.
pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    let corpus = load_corpus(&config.corpus)?;
    let report = run_bench_with_corpus(config, &corpus)?;
    if let Some(out) = &config.output {
        fs::write(out, &report.csv)?;
        info!("wrote {}", out.display());
    }
    Ok(report)
}

/// Runs the sweep on an already loaded corpus.
pub fn run_bench_with_corpus(config: &BenchConfig, corpus: &[CorpusEntry]) -> Result<BenchReport> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads())
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    pool.install(|| sweep(config, corpus))
}

fn sweep(config: &BenchConfig, corpus: &[CorpusEntry]) -> Result<BenchReport> {
    let s = config.downscale;
    let recon = config.effective_recon();
    let ssim_params = SsimParams {
        mode: config.ssim_mode,
        ..SsimParams::default()
    };

    let prepared_results: Vec<Result<(Prepared, bool)>> = corpus
        .par_iter()
        .map(|entry| match &entry.slice {
            Ok(raw) => prepare(raw, config, recon),
            Err(e) => Err(Error::InvalidParams(format!("{}: {e}", e.name()))),
        })
        .collect();
    let mut prepared = Vec::new();
    let mut skipped = Vec::new();
    let mut histogram_fallbacks = 0;
    for (entry, result) in corpus.iter().zip(prepared_results) {
        match result {
            Ok((p, fell_back)) => {
                histogram_fallbacks += fell_back as usize;
                prepared.push((entry.name.as_str(), p));
            }
            Err(e) => {
                let reason = match (&entry.slice, e) {
                    // load failures keep their own error name
                    (Err(_), Error::InvalidParams(msg)) => msg,
                    (_, e) => format!("{}: {e}", e.name()),
                };
                warn!("skipping {}: {reason}", entry.name);
                skipped.push(SkippedSlice {
                    name: entry.name.clone(),
                    reason,
                });
            }
        }
    }

    let mut rows = Vec::new();
    let mut masks = Vec::new();
    let mut notes = Vec::new();

    if config.path == DegradePath::Lowres {
        if !prepared.is_empty() {
            let reports = score(
                &prepared,
                |_, _| Ok(DegradeSpec::lowres(s)),
                config,
                recon,
                &ssim_params,
            )?;
            rows.extend(cell_rows(LOWRES_PATTERN, 1.0, (s * s) as u64, config.path, &reports)?);
        }
    } else {
        for &pattern in &config.patterns {
            for &accel in &config.accelerations {
                let fraction = accel_to_fraction(accel, s as u32)?;
                let total = total_accel(s as u32, accel);
                if prepared.is_empty() {
                    continue;
                }
                let cell = MaskCell {
                    pattern,
                    fraction,
                    seed: config.seed,
                };
                let per_slice = config.per_slice_seed && pattern == Pattern::Fastmri;
                let mut shared: BTreeMap<(usize, usize), Mask> = BTreeMap::new();
                let mut below_center = None;
                if !per_slice {
                    for (_, p) in &prepared {
                        let dims = (p.truth.height() / s, p.truth.width() / s);
                        if shared.contains_key(&dims) {
                            continue;
                        }
                        match cell.generate(dims, 0) {
                            Ok(mask) => {
                                shared.insert(dims, mask);
                            }
                            Err(e @ Error::FractionBelowCenter { .. }) => {
                                below_center = Some(e);
                                break;
                            }
                            Err(e) => return Err(e),
                        }
                    }
                } else if let Err(e @ Error::FractionBelowCenter { .. }) = {
                    let first = &prepared[0].1.truth;
                    cell.generate((first.height() / s, first.width() / s), 0).map(|_| ())
                } {
                    below_center = Some(e);
                }
                if let Some(e) = below_center {
                    let note = format!(
                        "{pattern} excluded at fraction {}: {}: {e}",
                        fmt_num(fraction),
                        e.name()
                    );
                    warn!("{note}");
                    notes.push(note);
                    continue;
                }
                for (dims, mask) in &shared {
                    masks.push(MaskRecord {
                        pattern,
                        fraction,
                        height: dims.0,
                        width: dims.1,
                        sha256: hex::encode(Sha256::digest(mask.to_pbm())),
                    });
                }
                if per_slice {
                    notes.push(format!(
                        "{pattern} at fraction {} uses per-slice masks seeded from {}",
                        fmt_num(fraction),
                        config.seed
                    ));
                }
                let spec_for = |index: usize, truth: &Slice| -> Result<DegradeSpec> {
                    let dims = (truth.height() / s, truth.width() / s);
                    let mask = if per_slice {
                        cell.generate(dims, index as u64)?
                    } else {
                        shared[&dims].clone()
                    };
                    Ok(match config.path {
                        DegradePath::Combined => DegradeSpec::combined(s, mask),
                        _ => DegradeSpec::undersample(mask),
                    })
                };
                let reports = score(&prepared, spec_for, config, recon, &ssim_params)?;
                rows.extend(cell_rows(&pattern.to_string(), fraction, total, config.path, &reports)?);
            }
        }
    }

    rows.sort_by(|a, b| {
        a.pattern
            .cmp(&b.pattern)
            .then(b.fraction.total_cmp(&a.fraction))
            .then(a.metric.cmp(&b.metric))
    });

    let slices_read = prepared.len();
    let mut report = BenchReport {
        rows,
        slices_read,
        slices_skipped: skipped.len(),
        skipped,
        histogram_fallbacks,
        masks,
        notes,
        csv: String::new(),
    };
    report.csv = render_csv(config, &report)?;
    Ok(report)
}

#[derive(Clone, Copy)]
struct MaskCell {
    pattern: Pattern,
    fraction: f64,
    seed: u64,
}

impl MaskCell {
    fn generate(&self, (h, w): (usize, usize), seed_offset: u64) -> Result<Mask> {
        match self.pattern {
            Pattern::Fastmri => make_fastmri_mask(
                h,
                w,
                self.fraction,
                DEFAULT_CENTER_FRACTION,
                self.seed.wrapping_add(seed_offset),
            ),
            Pattern::Radial => make_radial_mask(h, w, self.fraction, RADIAL_ANGLE_OFFSET),
            Pattern::Spiral => make_spiral_mask(h, w, self.fraction, SPIRAL_ARMS),
            Pattern::Unknown => Err(Error::InvalidConfig("pattern unknown cannot be generated".into())),
        }
    }
}

fn prepare(raw: &Slice, config: &BenchConfig, recon: Recon) -> Result<(Prepared, bool)> {
    let (truth, fell_back) = match config.normalization {
        Normalization::None => (raw.clone(), false),
        Normalization::Percentile => (normalize_percentile(raw, 2.0, 98.0)?, false),
        Normalization::Histogram => {
            let out = normalize_histogram(raw, &HistogramNormParams::default())?;
            (out.slice, out.fallback)
        }
    };
    let s = config.downscale;
    let (h, w) = truth.dims();
    if h % s != 0 || w % s != 0 {
        return Err(Error::DivisibilityViolation {
            height: h,
            width: w,
            factor: s,
        });
    }
    let low_output = s > 1 && config.path != DegradePath::Undersample && recon != Recon::ZeroFilledPlusBicubic;
    let low_reference = if low_output {
        Some(downscale(&truth, s, config.downscale_method)?)
    } else {
        None
    };
    Ok((Prepared { truth, low_reference }, fell_back))
}

fn score(
    prepared: &[(&str, Prepared)],
    spec_for: impl Fn(usize, &Slice) -> Result<DegradeSpec> + Sync,
    config: &BenchConfig,
    recon: Recon,
    ssim_params: &SsimParams,
) -> Result<Vec<IqReport>> {
    prepared
        .par_iter()
        .enumerate()
        .map(|(i, (_, p))| {
            let spec = spec_for(i, &p.truth)?
                .with_recon(recon)
                .with_downscale_method(config.downscale_method);
            let out = degrade(&p.truth, &spec)?;
            let reference = p.low_reference.as_ref().unwrap_or(&p.truth);
            evaluate(reference, &out, ssim_params, 1.0)
        })
        .collect()
}

fn cell_rows(
    pattern: &str,
    fraction: f64,
    total: u64,
    path: DegradePath,
    reports: &[IqReport],
) -> Result<Vec<BenchRow>> {
    let series: [(&str, Vec<f64>); 3] = [
        ("mse", reports.iter().map(|r| r.mse).collect()),
        ("psnr", reports.iter().map(|r| r.psnr).collect()),
        ("ssim", reports.iter().map(|r| r.ssim).collect()),
    ];
    series
        .into_iter()
        .map(|(metric, values)| {
            let agg = aggregate(&values)?;
            Ok(BenchRow {
                pattern: pattern.to_string(),
                fraction,
                total_acceleration: total,
                path,
                metric: metric.to_string(),
                mean: agg.mean,
                std: agg.std,
                n: agg.n,
            })
        })
        .collect()
}

/// 17 significant digits, round-trip exact; infinities as `inf`/`-inf`.
pub fn fmt_num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

fn row_fields(row: &BenchRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        row.pattern,
        fmt_num(row.fraction),
        row.total_acceleration,
        row.path,
        row.metric,
        fmt_num(row.mean),
        fmt_num(row.std),
        row.n
    )
}

fn render_metadata(config: &BenchConfig, report: &BenchReport, out: &mut String) -> Result<()> {
    // the destination does not change the results, so it is not echoed
    let echo = BenchConfig {
        output: None,
        ..config.clone()
    };
    let echo = serde_json::to_string(&echo).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let _ = writeln!(out, "# ksim-bench version={}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# config={echo}");
    let _ = writeln!(
        out,
        "# ssim_mode={} downscale_method={} normalization={} recon={:?}",
        config.ssim_mode,
        config.downscale_method,
        config.normalization,
        config.effective_recon()
    );
    let _ = writeln!(
        out,
        "# slices_read={} slices_skipped={} histogram_fallbacks={}",
        report.slices_read, report.slices_skipped, report.histogram_fallbacks
    );
    for s in &report.skipped {
        let _ = writeln!(out, "# skipped {}: {}", s.name, s.reason);
    }
    for m in &report.masks {
        let _ = writeln!(
            out,
            "# mask pattern={} fraction={} size={}x{} sha256={}",
            m.pattern,
            fmt_num(m.fraction),
            m.height,
            m.width,
            m.sha256
        );
    }
    for note in &report.notes {
        let _ = writeln!(out, "# note: {note}");
    }
    Ok(())
}

fn render_csv(config: &BenchConfig, report: &BenchReport) -> Result<String> {
    let mut out = String::new();
    render_metadata(config, report, &mut out)?;
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        out.push_str(&row_fields(row));
        out.push('\n');
    }
    Ok(out)
}

/// The same sweep once per normalization arm.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationComparison {
    pub arms: Vec<(Normalization, BenchReport)>,
    /// Rows of every arm with a leading `normalization` column.
    pub csv: String,
}

/// Runs the configured sweep under percentile and histogram normalization.
pub fn compare_normalizations(config: &BenchConfig, corpus: &[CorpusEntry]) -> Result<NormalizationComparison> {
    compare_normalization_arms(config, corpus, &[Normalization::Percentile, Normalization::Histogram])
}

pub fn compare_normalization_arms(
    config: &BenchConfig,
    corpus: &[CorpusEntry],
    arms: &[Normalization],
) -> Result<NormalizationComparison> {
    let mut out = String::new();
    let mut reports = Vec::new();
    for &arm in arms {
        let cfg = BenchConfig {
            normalization: arm,
            ..config.clone()
        };
        let report = run_bench_with_corpus(&cfg, corpus)?;
        for line in report.csv.lines().filter(|l| l.starts_with('#')) {
            let _ = writeln!(out, "# [{arm}] {}", &line[2..]);
        }
        reports.push((arm, report));
    }
    out.push_str("normalization,");
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (arm, report) in &reports {
        for row in &report.rows {
            let _ = writeln!(out, "{arm},{}", row_fields(row));
        }
    }
    Ok(NormalizationComparison {
        arms: reports,
        csv: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phantoms(kind: PhantomKind, size: usize, count: usize) -> CorpusSpec {
        CorpusSpec::Phantoms {
            phantoms: vec![PhantomEntry { kind, size }; count],
        }
    }

    fn rows_for<'a>(report: &'a BenchReport, pattern: &str, metric: &str) -> Vec<&'a BenchRow> {
        report
            .rows
            .iter()
            .filter(|r| r.pattern == pattern && r.metric == metric)
            .collect()
    }

    #[test]
    fn full_sampling_is_identity() {
        let cfg = BenchConfig::new(
            phantoms(PhantomKind::SheppLogan, 32, 2),
            vec![Pattern::Fastmri, Pattern::Radial, Pattern::Spiral],
            vec![1],
        );
        let report = run_bench(&cfg).unwrap();
        assert_eq!(report.rows.len(), 9);
        for row in &report.rows {
            assert_eq!(row.fraction, 1.0);
            assert_eq!(row.n, 2);
            match row.metric.as_str() {
                "mse" => assert!(row.mean < 1e-25),
                "ssim" => assert!((row.mean - 1.0).abs() < 1e-12),
                _ => {}
            }
        }
        // round-off keeps mse just above zero, so psnr is finite but huge
        assert!(report
            .rows
            .iter()
            .filter(|r| r.metric == "psnr")
            .all(|r| r.mean > 200.0));
    }

    #[test]
    fn exact_identity_renders_inf() {
        let slice = Slice::filled(16, 16, 0.0).unwrap();
        let corpus = [CorpusEntry::new("zeros", Ok(slice))];
        let cfg = BenchConfig::new(phantoms(PhantomKind::Ramp, 16, 1), vec![Pattern::Radial], vec![1]);
        let report = run_bench_with_corpus(&cfg, &corpus).unwrap();
        let psnr = rows_for(&report, "radial", "psnr")[0];
        assert_eq!(psnr.mean, f64::INFINITY);
        assert_eq!(psnr.std, 0.0);
        assert!(report.csv.contains(",psnr,inf,0.0000000000000000e0,1\n"));
    }

    #[test]
    fn radial_ssim_decreases_with_fraction() {
        let cfg = BenchConfig::new(
            phantoms(PhantomKind::SheppLogan, 128, 1),
            vec![Pattern::Radial],
            vec![2, 4, 8, 16, 32],
        );
        let report = run_bench(&cfg).unwrap();
        let ssim = rows_for(&report, "radial", "ssim");
        assert_eq!(ssim.len(), 5);
        for pair in ssim.windows(2) {
            assert!(pair[0].fraction > pair[1].fraction);
            assert!(pair[0].mean > pair[1].mean, "{} vs {}", pair[0].mean, pair[1].mean);
        }
    }

    #[test]
    fn combined_totals_and_row_count() {
        let mut cfg = BenchConfig::new(
            phantoms(PhantomKind::SheppLogan, 64, 1),
            vec![Pattern::Radial, Pattern::Spiral],
            vec![2, 4, 8],
        );
        cfg.path = DegradePath::Combined;
        cfg.downscale = 2;
        let report = run_bench(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2 * 3 * 3);
        let totals: Vec<u64> = rows_for(&report, "radial", "mse")
            .iter()
            .map(|r| r.total_acceleration)
            .collect();
        assert_eq!(totals, vec![8, 16, 32]);
        assert!(report.rows.iter().all(|r| r.path == DegradePath::Combined));
        assert_eq!(report.masks.len(), 6);
        assert!(report.masks.iter().all(|m| m.height == 32 && m.width == 32));
    }

    #[test]
    fn fastmri_excluded_below_center_band() {
        let cfg = BenchConfig::new(
            phantoms(PhantomKind::SheppLogan, 320, 1),
            vec![Pattern::Fastmri],
            vec![8, 16],
        );
        let report = run_bench(&cfg).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.notes.len(), 1);
        assert!(report.notes[0].contains("FractionBelowCenter"));
        assert!(report.csv.contains("# note: fastmri excluded"));
    }

    #[test]
    fn lowres_path_single_cell() {
        let mut cfg = BenchConfig::new(phantoms(PhantomKind::SheppLogan, 64, 1), vec![], vec![]);
        cfg.path = DegradePath::Lowres;
        cfg.downscale = 2;
        let report = run_bench(&cfg).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert!(report
            .rows
            .iter()
            .all(|r| r.pattern == "none" && r.total_acceleration == 4));
    }

    #[test]
    fn skips_are_counted() {
        let mut cfg = BenchConfig::new(phantoms(PhantomKind::Ramp, 16, 1), vec![Pattern::Radial], vec![4]);
        cfg.normalization = Normalization::Percentile;
        let corpus = [
            CorpusEntry::new("flat", Ok(Slice::filled(16, 16, 0.5).unwrap())),
            CorpusEntry::new("ramp", make_phantom(PhantomKind::Ramp, 16)),
            CorpusEntry::new("missing", Err(Error::MalformedHeader("truncated".into()))),
        ];
        let report = run_bench_with_corpus(&cfg, &corpus).unwrap();
        assert_eq!((report.slices_read, report.slices_skipped), (1, 2));
        assert!(report.skipped[0].reason.starts_with("DegenerateRange"));
        assert!(report.skipped[1].reason.starts_with("MalformedHeader"));
        assert!(report.rows.iter().all(|r| r.n == 1));
        assert!(report.csv.contains("# slices_read=1 slices_skipped=2"));

        let constant = [CorpusEntry::new("flat", Ok(Slice::filled(16, 16, 0.5).unwrap()))];
        let report = run_bench_with_corpus(&cfg, &constant).unwrap();
        assert!(report.rows.is_empty());
        assert_eq!(report.slices_skipped, 1);
        assert!(matches!(run_bench_with_corpus(&cfg, &[]), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn percentile_arm_matches_none_on_unit_slices() {
        // 3 zeros and 3 ones among 101 levels: p2 = 0 and p98 = 1
        let mut base: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        base[1] = 0.0;
        base[2] = 0.0;
        base[98] = 1.0;
        base[99] = 1.0;
        let slice = Slice::from_fn(101, 101, |r, c| base[(r + c) % 101]).unwrap();
        assert_eq!(normalize_percentile(&slice, 2.0, 98.0).unwrap(), slice);
        let corpus = [CorpusEntry::new("unit", Ok(slice))];
        let mut cfg = BenchConfig::new(phantoms(PhantomKind::Ramp, 8, 1), vec![Pattern::Radial], vec![2, 8]);
        let none = run_bench_with_corpus(&cfg, &corpus).unwrap();
        cfg.normalization = Normalization::Percentile;
        let pct = run_bench_with_corpus(&cfg, &corpus).unwrap();
        for (a, b) in none.rows.iter().zip(&pct.rows) {
            assert!((a.mean - b.mean).abs() <= 1e-12);
        }
    }

    #[test]
    fn bimodal_histogram_arm_never_falls_back() {
        let cfg = BenchConfig::new(
            phantoms(PhantomKind::BimodalField, 64, 3),
            vec![Pattern::Spiral],
            vec![4],
        );
        let corpus = load_corpus(&cfg.corpus).unwrap();
        let cmp = compare_normalizations(&cfg, &corpus).unwrap();
        let (arm, hist) = &cmp.arms[1];
        assert_eq!(*arm, Normalization::Histogram);
        assert_eq!(hist.histogram_fallbacks, 0);
        assert_eq!(hist.slices_read, 3);
        let data: Vec<&str> = cmp.csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data[0], format!("normalization,{CSV_HEADER}"));
        assert_eq!(data.len(), 1 + 2 * 3);
        assert!(data[1].starts_with("percentile,spiral,"));
        assert!(data[4].starts_with("histogram,spiral,"));
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let mut cfg = BenchConfig::new(
            phantoms(PhantomKind::SheppLogan, 32, 5),
            vec![Pattern::Fastmri, Pattern::Radial],
            vec![2, 4],
        );
        cfg.per_slice_seed = true;
        cfg.seed = 11;
        cfg.threads = Some(1);
        let serial = run_bench(&cfg).unwrap().csv;
        for threads in [0, 2, 8] {
            cfg.threads = Some(threads);
            assert_eq!(run_bench(&cfg).unwrap().csv, serial);
        }
    }

    #[test]
    fn config_json_roundtrip_and_validation() {
        let text = r#"{"corpus": {"phantoms": [{"kind": "shepp_logan", "size": 32}]},
                       "patterns": ["radial"], "accelerations": [4], "ssim_mode": "windowed"}"#;
        let cfg = BenchConfig::from_json(text).unwrap();
        assert_eq!(cfg.ssim_mode, SsimMode::Windowed);
        assert_eq!(cfg.path, DegradePath::Undersample);
        let again = BenchConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);

        assert!(matches!(
            BenchConfig::from_json("{\"corpus\": 3}"),
            Err(Error::InvalidConfig(_))
        ));
        let mut bad = cfg.clone();
        bad.accelerations = vec![3];
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        bad = cfg.clone();
        bad.downscale = 2;
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn directory_corpus_sorted_and_tolerant() {
        let dir = tempfile::tempdir().unwrap();
        let p = make_phantom(PhantomKind::SheppLogan, 32).unwrap();
        crate::imgio::write_slice(&p, &dir.path().join("b.ksim"), crate::imgio::SliceFormat::Ksim).unwrap();
        crate::imgio::write_slice(&p, &dir.path().join("a.pgm"), crate::imgio::SliceFormat::Pgm16).unwrap();
        fs::write(dir.path().join("c.pgm"), b"garbage").unwrap();
        fs::write(dir.path().join("notes.txt"), b"ignored").unwrap();
        let corpus = load_corpus(&CorpusSpec::Directory {
            directory: dir.path().to_path_buf(),
        })
        .unwrap();
        let names: Vec<&str> = corpus.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["a.pgm", "b.ksim", "c.pgm"]);
        assert!(corpus[2].slice.is_err());
    }
}
