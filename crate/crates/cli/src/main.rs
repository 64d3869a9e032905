//! `ksim` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime or data error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ksim_core::bench::{compare_normalizations, load_corpus, run_bench, BenchConfig};
use ksim_core::imgio::{read_slice_auto, write_slice, SliceFormat};
use ksim_core::masks::{
    accel_to_fraction, make_fastmri_mask, make_radial_mask, make_spiral_mask, read_mask, write_mask, Pattern,
    DEFAULT_CENTER_FRACTION,
};
use ksim_core::metrics::{evaluate, SsimMode, SsimParams};
use ksim_core::normalize::{normalize_histogram, normalize_percentile, HistogramNormParams};
use ksim_core::phantom::{make_phantom, PhantomKind};
use ksim_core::pipeline::{degrade, DegradePath, DegradeSpec, DownscaleMethod, Recon};
use ksim_core::{Error, Result};

#[derive(Parser)]
#[command(name = "ksim", version, about = "k-space undersampling and degradation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sampling mask (PBM plus JSON sidecar).
    GenMask(GenMaskArgs),
    /// Run an acquisition path on an image.
    Degrade(DegradeArgs),
    /// Compare two images: prints `mse=… psnr=… ssim=…`.
    Metrics(MetricsArgs),
    /// Intensity-normalize an image.
    Normalize(NormalizeArgs),
    /// Run a benchmark sweep from a JSON config.
    Bench(BenchArgs),
    /// Write a synthetic phantom.
    Phantom(PhantomArgs),
}

#[derive(Args)]
struct GenMaskArgs {
    #[arg(long, value_parser = parse_pattern)]
    pattern: Pattern,
    /// `N` for N×N or `HxW`.
    #[arg(long, value_parser = parse_size)]
    size: (usize, usize),
    #[arg(long, conflicts_with = "fraction", required_unless_present = "fraction")]
    accel: Option<u32>,
    /// Decimal or `1/k`.
    #[arg(long, value_parser = parse_fraction)]
    fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_CENTER_FRACTION)]
    center_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    angle_offset: f64,
    #[arg(long, default_value_t = 1)]
    arms: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DegradeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_parser = parse_path)]
    path: DegradePath,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    downscale: usize,
    #[arg(long, value_parser = parse_recon)]
    recon: Option<Recon>,
    #[arg(long, value_parser = parse_downscale_method, default_value = "kspace")]
    downscale_method: DownscaleMethod,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_parser = parse_ssim_mode, default_value = "global")]
    ssim_mode: SsimMode,
    #[arg(long, default_value_t = 1.0)]
    data_range: f64,
}

#[derive(Args)]
struct NormalizeArgs {
    #[arg(long, value_parser = ["percentile", "histogram"])]
    method: String,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    p_lo: f64,
    #[arg(long, default_value_t = 98.0)]
    p_hi: f64,
    #[arg(long, default_value_t = 256)]
    bins: usize,
    #[arg(long, default_value_t = 15)]
    degree: usize,
    #[arg(long, default_value_t = 5.0)]
    alpha: f64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Run the sweep under percentile and histogram normalization and emit
    /// paired rows.
    #[arg(long)]
    compare_normalizations: bool,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, value_parser = parse_phantom)]
    kind: PhantomKind,
    #[arg(long)]
    size: usize,
    #[arg(long)]
    out: PathBuf,
    /// PGM bit depth.
    #[arg(long, default_value_t = 16, value_parser = parse_bits)]
    bits: u8,
}

fn parse_pattern(s: &str) -> std::result::Result<Pattern, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_path(s: &str) -> std::result::Result<DegradePath, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_recon(s: &str) -> std::result::Result<Recon, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_downscale_method(s: &str) -> std::result::Result<DownscaleMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_ssim_mode(s: &str) -> std::result::Result<SsimMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_phantom(s: &str) -> std::result::Result<PhantomKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_bits(s: &str) -> std::result::Result<u8, String> {
    match s {
        "8" => Ok(8),
        "16" => Ok(16),
        _ => Err(format!("bit depth must be 8 or 16, got '{s}'")),
    }
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let dim = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad size '{s}': {e}"));
    match s.split_once(['x', 'X']) {
        Some((h, w)) => Ok((dim(h)?, dim(w)?)),
        None => dim(s).map(|n| (n, n)),
    }
}

fn parse_fraction(s: &str) -> std::result::Result<f64, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad fraction '{s}': {e}"));
    match s.split_once('/') {
        Some((a, b)) => Ok(num(a)? / num(b)?),
        None => num(s),
    }
}

fn image_format(path: &Path, pgm_bits: u8) -> Result<SliceFormat> {
    Ok(match SliceFormat::from_path(path)? {
        SliceFormat::Ksim => SliceFormat::Ksim,
        _ if pgm_bits == 8 => SliceFormat::Pgm8,
        _ => SliceFormat::Pgm16,
    })
}

fn gen_mask(args: GenMaskArgs) -> Result<()> {
    let (h, w) = args.size;
    let fraction = match (args.accel, args.fraction) {
        (Some(k), _) => accel_to_fraction(k, 1)?,
        (None, Some(f)) => f,
        (None, None) => unreachable!("clap requires one of --accel/--fraction"),
    };
    let mask = match args.pattern {
        Pattern::Fastmri => make_fastmri_mask(h, w, fraction, args.center_fraction, args.seed)?,
        Pattern::Radial => make_radial_mask(h, w, fraction, args.angle_offset)?,
        Pattern::Spiral => make_spiral_mask(h, w, fraction, args.arms)?,
        Pattern::Unknown => return Err(Error::UnknownKind("unknown".into())),
    };
    write_mask(&mask, &args.out)?;
    println!(
        "pattern={} size={}x{} target_fraction={} achieved_fraction={} popcount={} out={}",
        args.pattern,
        h,
        w,
        mask.meta().target_fraction,
        mask.meta().achieved_fraction,
        mask.popcount(),
        args.out.display()
    );
    Ok(())
}

fn degrade_cmd(args: DegradeArgs) -> Result<()> {
    let slice = read_slice_auto(&args.input)?;
    let mask = args.mask.as_deref().map(read_mask).transpose()?;
    let spec = DegradeSpec {
        path: args.path,
        downscale: args.downscale,
        mask,
        recon: args.recon.unwrap_or_default(),
        downscale_method: args.downscale_method,
    };
    let out = degrade(&slice, &spec)?;
    write_slice(&out, &args.out, image_format(&args.out, 16)?)?;
    println!(
        "path={} size={}x{} out={}",
        args.path,
        out.height(),
        out.width(),
        args.out.display()
    );
    Ok(())
}

fn metrics_cmd(args: MetricsArgs) -> Result<()> {
    let reference = read_slice_auto(&args.reference)?;
    let test = read_slice_auto(&args.test)?;
    let params = SsimParams {
        mode: args.ssim_mode,
        data_range: args.data_range,
        ..SsimParams::default()
    };
    let r = evaluate(&reference, &test, &params, args.data_range)?;
    println!("mse={} psnr={} ssim={}", r.mse, r.psnr, r.ssim);
    Ok(())
}

fn normalize_cmd(args: NormalizeArgs) -> Result<()> {
    let slice = read_slice_auto(&args.input)?;
    let format = image_format(&args.out, 16)?;
    if args.method == "percentile" {
        let out = normalize_percentile(&slice, args.p_lo, args.p_hi)?;
        write_slice(&out, &args.out, format)?;
        println!("method=percentile fallback=false out={}", args.out.display());
        return Ok(());
    }
    let params = HistogramNormParams {
        bin_count: args.bins,
        poly_degree: args.degree,
        alpha: args.alpha,
        ..HistogramNormParams::default()
    };
    let out = normalize_histogram(&slice, &params)?;
    write_slice(&out.slice, &args.out, format)?;
    println!(
        "method=histogram fallback={} m={} M={} width={} out={}",
        out.fallback,
        out.params.m_intensity,
        out.params.big_m_intensity,
        out.params.width,
        args.out.display()
    );
    Ok(())
}

fn bench_cmd(args: BenchArgs) -> Result<()> {
    let mut config = BenchConfig::load(&args.config)?;
    if let Some(out) = args.out {
        config.output = Some(out);
    }
    if args.threads.is_some() {
        config.threads = args.threads;
    }
    if args.compare_normalizations {
        let corpus = load_corpus(&config.corpus)?;
        let cmp = compare_normalizations(&config, &corpus)?;
        return emit_csv(&cmp.csv, config.output.as_deref(), || {
            let rows: usize = cmp.arms.iter().map(|(_, r)| r.rows.len()).sum();
            format!("arms={} rows={rows}", cmp.arms.len())
        });
    }
    let report = run_bench(&config)?;
    match &config.output {
        Some(path) => println!(
            "rows={} slices_read={} slices_skipped={} out={}",
            report.rows.len(),
            report.slices_read,
            report.slices_skipped,
            path.display()
        ),
        None => print!("{}", report.csv),
    }
    Ok(())
}

/// Writes the CSV to `out` and prints a summary line, or prints the CSV
/// itself when there is no output path.
fn emit_csv(csv: &str, out: Option<&Path>, summary: impl FnOnce() -> String) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, csv)?;
            println!("{} out={}", summary(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn phantom_cmd(args: PhantomArgs) -> Result<()> {
    let slice = make_phantom(args.kind, args.size)?;
    write_slice(&slice, &args.out, image_format(&args.out, args.bits)?)?;
    println!(
        "kind={} size={}x{} out={}",
        args.kind,
        args.size,
        args.size,
        args.out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenMask(a) => gen_mask(a),
        Command::Degrade(a) => degrade_cmd(a),
        Command::Metrics(a) => metrics_cmd(a),
        Command::Normalize(a) => normalize_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Phantom(a) => phantom_cmd(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            ExitCode::from(2)
        }
    }
}
