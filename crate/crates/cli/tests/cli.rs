use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ksim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksim"))
        .args(args)
        .output()
        .expect("spawn ksim")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn metrics_on_identical_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("x.pgm");
    let o = ksim(&["phantom", "--kind", "shepp-logan", "--size", "64", "--out", p(&img)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = ksim(&["metrics", "--ref", p(&img), "--test", p(&img)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "mse=0 psnr=inf ssim=1");
    let o = ksim(&[
        "metrics",
        "--ref",
        p(&img),
        "--test",
        p(&img),
        "--ssim-mode",
        "windowed",
    ]);
    assert_eq!(stdout(&o).trim(), "mse=0 psnr=inf ssim=1");
}

#[test]
fn fastmri_beyond_center_band_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.pbm");
    let o = ksim(&[
        "gen-mask",
        "--pattern",
        "fastmri",
        "--size",
        "320",
        "--accel",
        "32",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("FractionBelowCenter"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn gen_mask_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.pbm");
    let b = dir.path().join("b.pbm");
    for out in [&a, &b] {
        let o = ksim(&[
            "gen-mask",
            "--pattern",
            "radial",
            "--size",
            "320",
            "--accel",
            "16",
            "--out",
            p(out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("popcount=6400"));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(a.with_extension("json")).unwrap(),
        fs::read(b.with_extension("json")).unwrap()
    );
}

#[test]
fn accel_and_fraction_flags_agree() {
    let dir = tempfile::tempdir().unwrap();
    for k in [2u32, 4, 8, 16, 32, 64] {
        for pattern in ["radial", "spiral"] {
            let a = dir.path().join(format!("{pattern}_a{k}.pbm"));
            let f = dir.path().join(format!("{pattern}_f{k}.pbm"));
            let accel = k.to_string();
            let frac = format!("1/{k}");
            let oa = ksim(&[
                "gen-mask",
                "--pattern",
                pattern,
                "--size",
                "64",
                "--accel",
                &accel,
                "--out",
                p(&a),
            ]);
            let of = ksim(&[
                "gen-mask",
                "--pattern",
                pattern,
                "--size",
                "64",
                "--fraction",
                &frac,
                "--out",
                p(&f),
            ]);
            assert_eq!(oa.status.code(), Some(0), "{}", stderr(&oa));
            assert_eq!(of.status.code(), Some(0), "{}", stderr(&of));
            assert_eq!(fs::read(&a).unwrap(), fs::read(&f).unwrap(), "{pattern} x{k}");
        }
    }
    let o = ksim(&[
        "gen-mask",
        "--pattern",
        "radial",
        "--size",
        "64",
        "--accel",
        "4",
        "--fraction",
        "0.25",
        "--out",
        "x.pbm",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        vec!["frobnicate"],
        vec!["metrics", "--ref", "a.pgm"],
        vec![
            "phantom",
            "--kind",
            "shepp-logan",
            "--size",
            "32",
            "--out",
            "p.pgm",
            "--bogus",
        ],
        vec![
            "gen-mask",
            "--pattern",
            "zigzag",
            "--size",
            "32",
            "--accel",
            "2",
            "--out",
            "m.pbm",
        ],
    ] {
        let o = ksim(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!stderr(&o).is_empty());
    }
    assert_eq!(ksim(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_is_a_data_error() {
    let o = ksim(&["metrics", "--ref", "/nonexistent/a.pgm", "--test", "/nonexistent/b.pgm"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[Io]"));
}

#[test]
fn degrade_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("a.ksim");
    let mask = dir.path().join("m.pbm");
    let out = dir.path().join("b.ksim");
    assert_eq!(
        ksim(&["phantom", "--kind", "shepp-logan", "--size", "64", "--out", p(&img)])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        ksim(&[
            "gen-mask",
            "--pattern",
            "spiral",
            "--size",
            "64",
            "--accel",
            "4",
            "--out",
            p(&mask)
        ])
        .status
        .code(),
        Some(0)
    );
    let o = ksim(&[
        "degrade",
        "--in",
        p(&img),
        "--mask",
        p(&mask),
        "--path",
        "undersample",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("size=64x64"));
    let o = ksim(&["metrics", "--ref", p(&img), "--test", p(&out)]);
    let line = stdout(&o);
    let ssim: f64 = line.trim().rsplit("ssim=").next().unwrap().parse().unwrap();
    assert!(ssim > 0.0 && ssim < 1.0, "{line}");

    // the undersample path needs a mask
    let o = ksim(&["degrade", "--in", p(&img), "--path", "undersample", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("SpecViolation"));

    let low = dir.path().join("low.pgm");
    let o = ksim(&[
        "degrade",
        "--in",
        p(&img),
        "--path",
        "lowres",
        "--downscale",
        "2",
        "--out",
        p(&low),
    ]);
    assert!(stdout(&o).contains("size=32x32"), "{}", stderr(&o));
}

#[test]
fn normalize_reports_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("bimodal.ksim");
    let out = dir.path().join("n.ksim");
    ksim(&["phantom", "--kind", "bimodal-field", "--size", "128", "--out", p(&img)]);
    let o = ksim(&["normalize", "--method", "histogram", "--in", p(&img), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(
        stdout(&o).starts_with("method=histogram fallback=false"),
        "{}",
        stdout(&o)
    );

    let ramp = dir.path().join("ramp.ksim");
    ksim(&["phantom", "--kind", "ramp", "--size", "64", "--out", p(&ramp)]);
    let o = ksim(&[
        "normalize",
        "--method",
        "percentile",
        "--in",
        p(&ramp),
        "--out",
        p(&out),
    ]);
    assert_eq!(
        stdout(&o).trim(),
        format!("method=percentile fallback=false out={}", p(&out))
    );
}

#[test]
fn bench_writes_identical_csv_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"corpus": {"phantoms": [{"kind": "shepp_logan", "size": 64}, {"kind": "bimodal_field", "size": 64}]},
            "patterns": ["fastmri", "radial", "spiral"], "accelerations": [2, 4, 8], "seed": 3}"#,
    )
    .unwrap();
    let mut csvs = Vec::new();
    for threads in ["1", "0", "16"] {
        let out = dir.path().join(format!("r{threads}.csv"));
        let o = Command::new(env!("CARGO_BIN_EXE_ksim"))
            .args(["bench", "--config", p(&cfg), "--out", p(&out)])
            .env("KSIM_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).starts_with("rows=27 slices_read=2 slices_skipped=0"));
        csvs.push(fs::read(&out).unwrap());
    }
    assert!(csvs.windows(2).all(|w| w[0] == w[1]));

    // without an output path the CSV goes to stdout
    let o = ksim(&["bench", "--config", p(&cfg)]);
    assert!(stdout(&o).contains("pattern,fraction,total_acceleration,path,metric,mean,std,n"));

    let o = ksim(&["bench", "--config", p(&cfg), "--compare-normalizations"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("normalization,pattern,"));
}

#[test]
fn bench_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"corpus": {"phantoms": []}, "patterns": ["radial"], "accelerations": [3]}"#,
    )
    .unwrap();
    let o = ksim(&["bench", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("InvalidConfig"));
}
