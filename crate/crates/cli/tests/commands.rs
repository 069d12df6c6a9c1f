use std::path::Path;
use std::process::{Command, Output};

use caa_cli::args::{Cli, Command as Sub, ModeArg};
use clap::Parser;
use serde_json::Value;

fn caa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caa"))
        .args(args)
        .current_dir(dir)
        .env("CAA_THREADS", "2")
        .output()
        .unwrap()
}

fn report(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn generate_writes_corpus_manifest_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = caa(
        dir.path(),
        &[
            "generate",
            "--devices",
            "2",
            "--sessions",
            "4",
            "--samples",
            "16",
            "--seed",
            "7",
            "--out",
            "t",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("t.caad").exists());
    let m = report(&dir.path().join("t.manifest.json"));
    assert_eq!(m["config"]["num_devices"], 2);
    assert_eq!(m["config"]["sessions_per_device"], 4);
    assert_eq!(m["config"]["n_samples"], 16);
    let r = report(&dir.path().join("t.report.json"));
    assert_eq!(r["result"]["checksum"], m["checksum"]);
    assert!(r["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(r["config"], m["config"]);
}

#[test]
fn generate_defaults() {
    let cli = Cli::try_parse_from(["caa", "generate", "--out", "x"]).unwrap();
    let Sub::Generate(a) = cli.command else {
        panic!()
    };
    assert_eq!(a.devices, 300);
    assert_eq!(a.mode, ModeArg::Caa);
    assert_eq!(a.snr_db, 20.0);
    assert!(!cli.deterministic);
}

#[test]
fn repeated_generation_has_identical_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let args = |o| {
        [
            "generate",
            "--devices",
            "2",
            "--sessions",
            "4",
            "--samples",
            "16",
            "--seed",
            "7",
            "--out",
            o,
        ]
    };
    assert!(caa(dir.path(), &args("a")).status.success());
    assert!(caa(dir.path(), &args("b")).status.success());
    let a = report(&dir.path().join("a.manifest.json"));
    let b = report(&dir.path().join("b.manifest.json"));
    assert_eq!(a["checksum"], b["checksum"]);
}

#[test]
fn invalid_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        &["generate", "--devices", "0", "--out", "x"][..],
        &["generate", "--mode", "bogus", "--out", "x"],
        &["generate", "--samples", "-3", "--out", "x"],
        &["generate", "--snr-db", "loud", "--out", "x"],
    ] {
        let out = caa(dir.path(), bad);
        assert!(!out.status.success(), "{bad:?}");
    }
    let out = caa(dir.path(), &["generate", "--snr-db", "NaN", "--out", "x"]);
    assert!(!out.status.success());
    assert!(!dir.path().join("x.caad").exists());
}

#[test]
fn train_then_eval_on_a_toy_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(caa(
        d,
        &[
            "generate",
            "--devices",
            "2",
            "--sessions",
            "10",
            "--samples",
            "64",
            "--seed",
            "1",
            "--out",
            "toy"
        ]
    )
    .status
    .success());
    let out = caa(
        d,
        &[
            "--deterministic",
            "train",
            "--data",
            "toy",
            "--out",
            "m",
            "--epochs",
            "3",
            "--filters",
            "4",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(d.join("m.caam").exists());
    let out = caa(
        d,
        &["eval", "--data", "toy", "--model", "m.caam", "--out", "ev"],
    );
    assert!(out.status.success());
    let acc = report(&d.join("ev.report.json"))["result"]["accuracy"]
        .as_f64()
        .unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert!(String::from_utf8_lossy(&out.stdout).contains("accuracy"));
    let csv = std::fs::read_to_string(d.join("ev.confusion.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn eval_rejects_a_checkpoint_with_the_wrong_class_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(caa(
        d,
        &[
            "generate",
            "--devices",
            "2",
            "--sessions",
            "4",
            "--samples",
            "32",
            "--out",
            "two"
        ]
    )
    .status
    .success());
    assert!(caa(
        d,
        &[
            "generate",
            "--devices",
            "3",
            "--sessions",
            "4",
            "--samples",
            "32",
            "--out",
            "three"
        ]
    )
    .status
    .success());
    assert!(caa(
        d,
        &[
            "train",
            "--data",
            "two",
            "--out",
            "m",
            "--epochs",
            "1",
            "--filters",
            "2"
        ]
    )
    .status
    .success());
    let out = caa(
        d,
        &["eval", "--data", "three", "--model", "m.caam", "--out", "e"],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("shape"));
}

#[test]
fn missing_dataset_is_a_file_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = caa(dir.path(), &["train", "--data", "nowhere", "--out", "m"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));
}

#[test]
fn stats_suites_pass_and_report() {
    let dir = tempfile::tempdir().unwrap();
    for suite in ["phase-uniformity", "channel-autocorr", "rayleigh-ks", "snr"] {
        let out = caa(dir.path(), &["stats", "--suite", suite, "--out", suite]);
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(out.status.success(), "{suite}: {stdout}");
        assert!(stdout.starts_with("PASS"), "{stdout}");
        let r = report(&dir.path().join(format!("{suite}.report.json")));
        assert_eq!(r["result"]["passed"], true);
    }
}

#[test]
fn failing_stats_exit_nonzero() {
    // one session is far too short to average out the fading power
    let dir = tempfile::tempdir().unwrap();
    let out = caa(
        dir.path(),
        &[
            "stats",
            "--suite",
            "snr",
            "--snr-sessions",
            "1",
            "--out",
            "s",
        ],
    );
    assert!(!out.status.success());
    let r = report(&dir.path().join("s.report.json"));
    assert_eq!(r["result"]["passed"], false);
}

fn csv_values(path: &Path) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn plot_feedline_map_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    assert!(caa(
        dir.path(),
        &[
            "plot",
            "--mode",
            "feedline",
            "--antenna-id",
            "3",
            "--out",
            "f"
        ]
    )
    .status
    .success());
    let v = csv_values(&dir.path().join("f.phase.csv"));
    assert!(v.iter().all(|&x| x == v[0]));
    let svg = std::fs::read_to_string(dir.path().join("f.phase.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn plot_geometry_map_spreads_and_histogram_counts_antennas() {
    let dir = tempfile::tempdir().unwrap();
    let out = caa(
        dir.path(),
        &[
            "plot",
            "--mode",
            "caa",
            "--grid-resolution",
            "1",
            "--out",
            "g",
        ],
    );
    assert!(out.status.success());
    let v = csv_values(&dir.path().join("g.phase.csv"));
    assert_eq!(v.len(), 76 * 361);
    let (lo, hi) = v
        .iter()
        .fold((f64::MAX, f64::MIN), |(l, h), &x| (l.min(x), h.max(x)));
    assert!(hi - lo > 0.5, "{}", hi - lo);
    let counts = csv_values(&dir.path().join("g.histogram.csv"));
    assert_eq!(counts.len(), 36);
    assert_eq!(counts.iter().sum::<f64>(), 1200.0);
    assert!(dir.path().join("g.histogram.svg").exists());
}

#[test]
fn plot_rejects_a_bad_resolution() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!caa(
        dir.path(),
        &["plot", "--grid-resolution", "0", "--out", "p"]
    )
    .status
    .success());
}
