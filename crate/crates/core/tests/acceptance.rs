//! Acceptance suite. Runs every criterion at its stated tolerance and
//! runtime bound, prints one PASS/FAIL line each and exits non-zero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ksim_core::bench::{run_bench, BenchConfig, CorpusSpec, PhantomEntry};
use ksim_core::fourier::{dft2_direct, fft2_centered};
use ksim_core::masks::{
    make_fastmri_mask, make_radial_mask, make_spiral_mask, round_half_up, total_accel, Mask, Pattern,
    DEFAULT_CENTER_FRACTION, SUPPORTED_ACCELERATIONS,
};
use ksim_core::metrics::{mse, psnr, ssim, SsimParams, DEFAULT_K1, DEFAULT_K2};
use ksim_core::normalize::{
    fit_histogram_poly, normalize_histogram, normalize_percentile, percentile, HistogramNormParams,
};
use ksim_core::phantom::{make_phantom, PhantomKind};
use ksim_core::pipeline::{degrade, kspace_downscale, kspace_upscale, zero_filled, DegradePath, DegradeSpec};
use ksim_core::{Error, Slice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_slice(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Slice {
    Slice::from_fn(h, w, |_, _| rng.random::<f64>()).unwrap()
}

fn fft_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases = 60;
    let mut worst_fft = 0.0f64;
    let mut worst_parseval = 0.0f64;
    for _ in 0..cases {
        let (h, w) = (rng.random_range(8..=32), rng.random_range(8..=32));
        let s = random_slice(&mut rng, h, w);
        let fast = fft2_centered(&s);
        let slow = dft2_direct(&s).map_err(|e| e.to_string())?;
        let scale = slow.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let diff = fast
            .values()
            .iter()
            .zip(slow.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst_fft = worst_fft.max(diff / scale);
        let e_img = s.energy();
        worst_parseval = worst_parseval.max((fast.energy() - e_img).abs() / e_img);
    }
    check(worst_fft <= 1e-9, || format!("fft vs dft rel err {worst_fft:.3e}"))?;
    check(worst_parseval <= 1e-10, || {
        format!("parseval rel err {worst_parseval:.3e}")
    })?;
    Ok(format!(
        "{cases} slices, max rel err {worst_fft:.1e}, parseval {worst_parseval:.1e}"
    ))
}

fn mask_fractions() -> Outcome {
    let mut checked = 0;
    for size in [64usize, 128, 320] {
        let n = size * size;
        for &k in &SUPPORTED_ACCELERATIONS {
            let f = 1.0 / k as f64;
            let want = round_half_up(f * n as f64);
            for (name, mask) in [
                ("radial", make_radial_mask(size, size, f, 0.0)),
                ("spiral", make_spiral_mask(size, size, f, 1)),
            ] {
                let mask = mask.map_err(|e| format!("{name} {size} x{k}: {e}"))?;
                check(mask.popcount() == want, || {
                    format!("{name} {size}² x{k}: popcount {} != {want}", mask.popcount())
                })?;
                checked += 1;
            }
        }
        for k in [2u32, 4, 8] {
            let f = 1.0 / k as f64;
            let mask = make_fastmri_mask(size, size, f, DEFAULT_CENTER_FRACTION, 7).map_err(|e| e.to_string())?;
            let cols = mask.full_columns();
            let n_center = round_half_up(DEFAULT_CENTER_FRACTION * size as f64);
            let start = size / 2 - n_center / 2;
            check(cols.len() == round_half_up(f * size as f64), || {
                format!("fastmri {size} x{k}: {} columns", cols.len())
            })?;
            check(mask.popcount() == cols.len() * size, || {
                format!("fastmri {size} x{k}: partial columns")
            })?;
            check((start..start + n_center).all(|c| cols.contains(&c)), || {
                format!("fastmri {size} x{k}: central band incomplete")
            })?;
            checked += 1;
        }
    }
    for k in [16u32, 32, 64] {
        match make_fastmri_mask(320, 320, 1.0 / k as f64, DEFAULT_CENTER_FRACTION, 7) {
            Err(Error::FractionBelowCenter { .. }) => {}
            other => return Err(format!("fastmri 320 x{k}: expected FractionBelowCenter, got {other:?}")),
        }
    }
    Ok(format!(
        "{checked} masks exact, fastmri x16/32/64 rejected at width 320"
    ))
}

fn naive_mse(x: &Slice, y: &Slice) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.height() {
        for j in 0..x.width() {
            acc += (x.get(i, j) - y.get(i, j)).powi(2);
        }
    }
    acc / (x.height() * x.width()) as f64
}

fn naive_global_ssim(x: &Slice, y: &Slice) -> f64 {
    let n = x.len() as f64;
    let mx = x.pixels().iter().sum::<f64>() / n;
    let my = y.pixels().iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
    for (a, b) in x.pixels().iter().zip(y.pixels()) {
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
        cov += (a - mx) * (b - my);
    }
    let (vx, vy, cov) = (vx / n, vy / n, cov / n);
    let c1 = (0.01f64 * 1.0).powi(2);
    let c2 = (0.03f64 * 1.0).powi(2);
    ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

fn metric_oracles() -> Outcome {
    let params = SsimParams::default();
    check(
        params.k1 == 0.01 && params.k2 == 0.03 && params.data_range == 1.0,
        || "default SSIM constants differ".into(),
    )?;
    check(DEFAULT_K1 == 0.01 && DEFAULT_K2 == 0.03, || "k constants differ".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pairs = 120;
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let x = random_slice(&mut rng, 32, 32);
        let y = random_slice(&mut rng, 32, 32);
        let m = naive_mse(&x, &y);
        let p = 10.0 * (1.0 / m).log10();
        let s = naive_global_ssim(&x, &y);
        let got = (
            mse(&x, &y).unwrap(),
            psnr(&x, &y, 1.0).unwrap(),
            ssim(&x, &y, &params).unwrap(),
        );
        worst = worst
            .max((got.0 - m).abs())
            .max((got.1 - p).abs())
            .max((got.2 - s).abs());
        let same = (
            ssim(&x, &x, &params).unwrap(),
            ssim(&x, &x, &SsimParams::windowed()).unwrap(),
            psnr(&x, &x, 1.0).unwrap(),
        );
        check(same.0 == 1.0 && same.1 == 1.0 && same.2 == f64::INFINITY, || {
            format!("self-comparison gave {same:?}")
        })?;
    }
    check(worst <= 1e-12, || format!("max deviation {worst:.3e}"))?;
    Ok(format!("{pairs} pairs, max deviation {worst:.1e}"))
}

fn identity_degradation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for (h, w) in [(32, 32), (64, 48), (33, 17)] {
        let s = random_slice(&mut rng, h, w);
        for spec in [
            DegradeSpec::undersample(Mask::full(h, w)),
            DegradeSpec::combined(1, Mask::full(h, w)),
            DegradeSpec::lowres(1),
        ] {
            let out = degrade(&s, &spec).map_err(|e| e.to_string())?;
            let d = out
                .pixels()
                .iter()
                .zip(s.pixels())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst = worst.max(d);
        }
    }
    check(worst <= 1e-10, || format!("identity max deviation {worst:.3e}"))?;
    let mut worst_const = 0.0f64;
    for c in [0.0, 0.37, 1.0] {
        for s in [2usize, 4] {
            let img = Slice::filled(64, 64, c).unwrap();
            for out in [
                kspace_downscale(&img, s).map_err(|e| e.to_string())?,
                kspace_upscale(&img, s).map_err(|e| e.to_string())?,
            ] {
                let d = out.pixels().iter().map(|v| (v - c).abs()).fold(0.0, f64::max);
                worst_const = worst_const.max(d);
            }
        }
    }
    check(worst_const <= 1e-12, || {
        format!("constant fixed point deviation {worst_const:.3e}")
    })?;
    Ok(format!("identity {worst:.1e}, constants {worst_const:.1e}"))
}

fn monotone_curve() -> Outcome {
    let truth = make_phantom(PhantomKind::SheppLogan, 320).map_err(|e| e.to_string())?;
    let fractions = [0.5, 0.25, 0.125, 0.0625, 0.03125];
    let params = SsimParams::default();
    let mut summary = Vec::new();
    for pattern in ["radial", "spiral"] {
        let mut curve = Vec::new();
        for &f in &fractions {
            let mask = match pattern {
                "radial" => make_radial_mask(320, 320, f, 0.0),
                _ => make_spiral_mask(320, 320, f, 1),
            }
            .map_err(|e| e.to_string())?;
            let recon = zero_filled(&truth, &mask).map_err(|e| e.to_string())?;
            curve.push(ssim(&truth, &recon, &params).map_err(|e| e.to_string())?);
        }
        for (i, pair) in curve.windows(2).enumerate() {
            check(pair[1] <= pair[0] + 1e-3, || {
                format!(
                    "{pattern}: ssim rises from {} to {} at fraction {}",
                    pair[0],
                    pair[1],
                    fractions[i + 1]
                )
            })?;
        }
        summary.push(format!(
            "{pattern} {}",
            curve.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(">")
        ));
    }
    Ok(summary.join(", "))
}

fn total_acceleration() -> Outcome {
    for (u, want) in [(2u32, 8u64), (4, 16), (8, 32)] {
        let total = total_accel(2, u);
        check(total == want, || format!("s=2 x{u}: total {total} != {want}"))?;
        check((1.0 / total as f64 - 1.0 / want as f64).abs() < 1e-15, || {
            "fraction mismatch".into()
        })?;
    }
    let mut cfg = BenchConfig::new(
        CorpusSpec::Phantoms {
            phantoms: vec![PhantomEntry {
                kind: PhantomKind::SheppLogan,
                size: 64,
            }],
        },
        vec![Pattern::Radial],
        vec![2, 4, 8],
    );
    cfg.path = DegradePath::Combined;
    cfg.downscale = 2;
    let report = run_bench(&cfg).map_err(|e| e.to_string())?;
    let mut totals: Vec<u64> = report.rows.iter().map(|r| r.total_acceleration).collect();
    totals.dedup();
    check(totals == [8, 16, 32], || format!("bench totals {totals:?}"))?;
    Ok("x2/x4/x8 at s=2 -> x8/x16/x32 (12.5%/6.25%/3.125%)".into())
}

fn naive_percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let i = rank.floor() as usize;
    let j = rank.ceil() as usize;
    v[i] + (rank - i as f64) * (v[j] - v[i])
}

fn normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(2..500);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..7.0)).collect();
        let p = rng.random_range(0.0..=100.0);
        worst = worst.max((percentile(&values, p).unwrap() - naive_percentile(&values, p)).abs());
    }
    let ramp: Vec<f64> = (0..=1000).map(|i| i as f64).collect();
    let s = Slice::new(1, 1001, ramp.clone()).unwrap();
    let out = normalize_percentile(&s, 2.0, 98.0).map_err(|e| e.to_string())?;
    for (x, y) in ramp.iter().zip(out.pixels()) {
        worst = worst.max((y - ((x - 20.0) / 960.0).clamp(0.0, 1.0)).abs());
    }
    check(worst <= 1e-12, || format!("percentile deviation {worst:.3e}"))?;

    let bimodal = make_phantom(PhantomKind::BimodalField, 320).map_err(|e| e.to_string())?;
    let params = HistogramNormParams::default();
    let out = normalize_histogram(&bimodal, &params).map_err(|e| e.to_string())?;
    let bin = (bimodal.max() - bimodal.min()) / params.bin_count as f64;
    let big_m = out.params.big_m_intensity;
    check(!out.fallback, || "bimodal phantom fell back".into())?;
    check((big_m - 0.6).abs() <= 2.0 * bin, || {
        format!("M = {big_m}, bin width {bin}")
    })?;
    check(out.params.alpha == 5.0, || format!("alpha {}", out.params.alpha))?;
    check(out.slice.pixels().iter().all(|v| (0.0..=1.0).contains(v)), || {
        "output outside [0,1]".into()
    })?;
    fit_histogram_poly(&bimodal, 256, 15).map_err(|e| e.to_string())?;

    // sqrt of a uniform ramp has a linearly rising histogram
    let n = 256 * 256;
    let monotone = Slice::from_fn(256, 256, |r, c| (((r * 256 + c) as f64 + 0.5) / n as f64).sqrt()).unwrap();
    let fb = normalize_histogram(&monotone, &params).map_err(|e| e.to_string())?;
    check(fb.fallback, || "monotone histogram did not fall back".into())?;
    Ok(format!(
        "percentile {worst:.1e}, M={big_m:.4} (bin {bin:.4}), fallback flagged"
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = BenchConfig::new(
        CorpusSpec::Phantoms {
            phantoms: [
                PhantomKind::SheppLogan,
                PhantomKind::BimodalField,
                PhantomKind::SheppLogan,
            ]
            .into_iter()
            .map(|kind| PhantomEntry { kind, size: 64 })
            .collect(),
        },
        vec![Pattern::Fastmri, Pattern::Radial, Pattern::Spiral],
        vec![2, 4, 8],
    );
    cfg.seed = 42;
    cfg.per_slice_seed = true;
    let mut outputs = Vec::new();
    for (i, threads) in [1usize, 0, 64, 64].into_iter().enumerate() {
        cfg.threads = Some(threads);
        cfg.output = Some(dir.path().join(format!("run{i}.csv")));
        run_bench(&cfg).map_err(|e| e.to_string())?;
        outputs.push(std::fs::read(cfg.output.as_ref().unwrap()).map_err(|e| e.to_string())?);
    }
    check(outputs.windows(2).all(|w| w[0] == w[1]), || {
        "CSV bytes differ between runs".into()
    })?;
    Ok(format!(
        "{} runs (1, auto, 64, 64 threads), {} bytes each",
        outputs.len(),
        outputs[0].len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 FFT oracle equivalence", Some(Duration::from_secs(5)), fft_oracle),
        ("2 exact mask fractions", Some(Duration::from_secs(10)), mask_fractions),
        ("3 metric oracles", Some(Duration::from_secs(5)), metric_oracles),
        ("4 identity degradation", None, identity_degradation),
        (
            "5 monotone degradation curve",
            Some(Duration::from_secs(30)),
            monotone_curve,
        ),
        ("6 total-acceleration bookkeeping", None, total_acceleration),
        ("7 normalization", Some(Duration::from_secs(5)), normalization),
        ("8 bench determinism", None, determinism),
    ];
    let mut failures = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let mut outcome = run();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(limit)) = (&outcome, limit) {
            if elapsed > limit {
                outcome = Err(format!("took {elapsed:.2?}, limit {limit:?}"));
            }
        }
        match outcome {
            Ok(detail) => println!("PASS criterion {name} [{elapsed:.2?}]: {detail}"),
            Err(why) => {
                failures += 1;
                println!("FAIL criterion {name} [{elapsed:.2?}]: {why}");
            }
        }
    }
    if failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
