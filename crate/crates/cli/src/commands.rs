use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use caa_core::channel::{coherence_time, ChannelParams};
use caa_core::classifier::{self, evaluate, train_with, Cnn3, Cnn3Spec, Examples, TrainConfig};
use caa_core::dataset::{self, CorpusConfig, Split};
use caa_core::fingerprint::{
    synthesize_phase_field, FingerprintMode, RandomizationParams, THETA_MAX,
};
use caa_core::seed;
use caa_core::stats::{chi_square_uniform, histogram};
use caa_core::validation::{self, FadingCheck, ValidationReport};
use serde::Serialize;
use serde_json::json;

use crate::args::{EvalArgs, GenerateArgs, PlotArgs, SplitArg, StatsArgs, Suite, TrainArgs};
use crate::figures;
use crate::report::{with_suffix, write_report, RunReport, Stopwatch};

/// What a command produced: its report and whether it counts as success.
pub struct Outcome {
    pub report: RunReport,
    pub report_path: PathBuf,
    pub success: bool,
}

fn finish(base: &Path, report: RunReport, success: bool) -> Result<Outcome> {
    let report_path = write_report(base, &report)?;
    Ok(Outcome {
        report,
        report_path,
        success,
    })
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

pub fn corpus_config(a: &GenerateArgs) -> CorpusConfig {
    CorpusConfig {
        num_devices: a.devices,
        sessions_per_device: a.sessions,
        n_samples: a.samples,
        mode: a.mode.into(),
        channel: ChannelParams {
            snr_db: a.snr_db,
            ..ChannelParams::default()
        },
        randomization: RandomizationParams::with_seed(a.seed),
        ..CorpusConfig::default()
    }
}

pub fn generate(a: &GenerateArgs) -> Result<Outcome> {
    let clock = Stopwatch::start();
    let cfg = corpus_config(a);
    cfg.validate()?;
    ensure_parent(&a.out)?;
    let manifest = dataset::generate_corpus_to_file(&cfg, &a.out, true)?;
    let (data, manifest_path) = dataset::corpus_paths(&a.out);
    println!(
        "wrote {} ({} records, checksum {})",
        data.display(),
        manifest.num_records,
        manifest.checksum
    );
    let result = json!({
        "data": data,
        "manifest": manifest_path,
        "num_records": manifest.num_records,
        "split_counts": manifest.split_counts,
        "payload_bytes": manifest.payload_bytes,
        "checksum": manifest.checksum,
    });
    finish(&a.out, clock.report(&cfg, result)?, true)
}

fn split_of(s: SplitArg) -> Split {
    match s {
        SplitArg::Train => Split::Train,
        SplitArg::Val => Split::Val,
        SplitArg::Test => Split::Test,
    }
}

#[derive(Serialize)]
struct TrainEcho<'a> {
    data: &'a Path,
    spec: Cnn3Spec,
    train: TrainConfig,
}

pub fn train(a: &TrainArgs, deterministic: bool) -> Result<Outcome> {
    let clock = Stopwatch::start();
    let corpus = dataset::read_corpus(&a.data)?;
    let train_set = Examples::from_corpus(&corpus, Split::Train)?;
    let val_set = Examples::from_corpus(&corpus, Split::Val)?;
    let spec = Cnn3Spec {
        filters1: a.filters,
        filters2: a.filters,
        ..Cnn3Spec::reference(corpus.header.n_samples as usize, corpus.num_classes())
    };
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        patience: a.patience,
        seed: a.seed,
        schedule: a.schedule.into(),
        weight_decay: a.weight_decay,
        deterministic,
        ..TrainConfig::default()
    };
    let model = Cnn3::<f32>::init(spec, a.seed)?;
    let (model, history) = train_with(model, &train_set, &val_set, &cfg, |s| {
        eprintln!(
            "epoch {:>3}  lr {:.2e}  loss {:.4}  train {:.4}  val {:.4}  ({:.1}s)",
            s.epoch, s.learning_rate, s.train_loss, s.train_accuracy, s.val_accuracy, s.seconds
        );
    })?;
    let ckpt = with_suffix(&a.out, ".caam");
    ensure_parent(&ckpt)?;
    classifier::save_checkpoint(&model, &ckpt)?;
    println!(
        "best val accuracy {:.4} at epoch {}; wrote {}",
        history.best_val_accuracy,
        history.best_epoch,
        ckpt.display()
    );
    let echo = TrainEcho {
        data: &a.data,
        spec,
        train: cfg,
    };
    let result = json!({
        "checkpoint": ckpt,
        "best_epoch": history.best_epoch,
        "best_val_accuracy": history.best_val_accuracy,
        "stopped_early": history.stopped_early,
        "epochs": history.epochs,
    });
    finish(&a.out, clock.report(echo, result)?, true)
}

pub fn eval(a: &EvalArgs) -> Result<Outcome> {
    let clock = Stopwatch::start();
    let corpus = dataset::read_corpus(&a.data)?;
    let model = classifier::load_checkpoint(&a.model)?;
    if model.spec().num_classes != corpus.num_classes() {
        return Err(caa_core::Error::Shape(format!(
            "checkpoint has {} classes, corpus has {} devices",
            model.spec().num_classes,
            corpus.num_classes()
        ))
        .into());
    }
    let data = Examples::from_corpus(&corpus, split_of(a.split))?;
    let metrics = evaluate(&model, &data, true)?;
    let csv = with_suffix(&a.out, ".confusion.csv");
    ensure_parent(&csv)?;
    std::fs::write(&csv, metrics.confusion_csv())
        .with_context(|| format!("writing {}", csv.display()))?;
    println!(
        "accuracy {:.4} ({} sessions)",
        metrics.accuracy, metrics.total
    );
    let echo = json!({ "data": a.data, "model": a.model, "split": split_of(a.split) });
    let result = json!({
        "accuracy": metrics.accuracy,
        "total": metrics.total,
        "per_class_accuracy": metrics.per_class_accuracy,
        "confusion_csv": csv,
    });
    finish(&a.out, clock.report(echo, result)?, true)
}

pub fn run_suites(a: &StatsArgs) -> Result<Vec<ValidationReport>> {
    let all = a.suite == Suite::All;
    let channel = ChannelParams::default();
    let check = FadingCheck {
        traces: a.traces,
        seed: seed::derive(a.seed, &[seed::tag::FADING]),
        ..FadingCheck::default()
    };
    let mut out = Vec::new();
    if all || a.suite == Suite::PhaseUniformity {
        let params = RandomizationParams::with_seed(a.seed);
        out.push(validation::phase_uniformity(
            &params,
            a.antennas,
            seed::derive(a.seed, &[seed::tag::DIRECTION]),
        )?);
    }
    if all || a.suite == Suite::ChannelAutocorr {
        out.push(validation::channel_autocorrelation(&channel, &check, true)?);
        out.push(validation::channel_power(&channel, &check, true)?);
    }
    if all || a.suite == Suite::RayleighKs {
        out.push(validation::rayleigh_envelope(
            &channel,
            a.draws,
            seed::derive(a.seed, &[seed::tag::FADING, 1]),
            true,
        )?);
    }
    if all || a.suite == Suite::Snr {
        let cfg = CorpusConfig {
            channel: ChannelParams {
                snr_db: a.snr_db,
                ..ChannelParams::default()
            },
            randomization: RandomizationParams::with_seed(a.seed),
            ..CorpusConfig::default()
        };
        out.push(validation::snr_calibration(&cfg, a.snr_sessions, true)?);
    }
    Ok(out)
}

pub fn stats(a: &StatsArgs) -> Result<Outcome> {
    let clock = Stopwatch::start();
    let reports = run_suites(a)?;
    for r in &reports {
        println!("{}", r.summary());
    }
    let passed = reports.iter().all(|r| r.passed);
    let echo = json!({
        "suite": format!("{:?}", a.suite),
        "antennas": a.antennas,
        "traces": a.traces,
        "draws": a.draws,
        "snr_sessions": a.snr_sessions,
        "snr_db": a.snr_db,
        "seed": a.seed,
        "channel": ChannelParams::default(),
        "coherence_time_s": coherence_time(ChannelParams::default().doppler_hz())?,
    });
    ensure_parent(&a.out)?;
    finish(
        &a.out,
        clock.report(echo, json!({ "passed": passed, "tests": reports }))?,
        passed,
    )
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round().max(1.0) as usize;
    (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect()
}

pub fn plot(a: &PlotArgs) -> Result<Outcome> {
    let clock = Stopwatch::start();
    if !(a.grid_resolution.is_finite() && a.grid_resolution > 0.0 && a.grid_resolution <= 75.0) {
        bail!("--grid-resolution must be in (0, 75] degrees");
    }
    ensure_parent(&a.out)?;
    let mode: FingerprintMode = a.mode.into();
    let params = RandomizationParams::with_seed(a.seed);
    let field = synthesize_phase_field(&params, a.antenna_id, mode);
    let thetas = axis(0.0, THETA_MAX, a.grid_resolution.to_radians());
    let phis = axis(-PI, PI, a.grid_resolution.to_radians());
    let grid = field.grid(thetas.len(), phis.len());

    let mut csv = String::from("theta_deg,phi_deg,phase_rad\n");
    for (i, t) in thetas.iter().enumerate() {
        for (j, p) in phis.iter().enumerate() {
            csv.push_str(&format!(
                "{:.6},{:.6},{:.9}\n",
                t.to_degrees(),
                p.to_degrees(),
                grid[i][j]
            ));
        }
    }
    let (lo, hi) = grid
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    let map_csv = with_suffix(&a.out, ".phase.csv");
    let map_svg = with_suffix(&a.out, ".phase.svg");
    write(&map_csv, &csv)?;
    let title = format!("antenna {} ({mode}) phase error", a.antenna_id);
    write(
        &map_svg,
        &figures::polar_heatmap(&title, &thetas, &phis, &grid, THETA_MAX),
    )?;

    let phases = validation::sampled_phases(
        &params,
        mode,
        a.antennas,
        seed::derive(a.seed, &[seed::tag::DIRECTION]),
    )?;
    let bins = 36;
    let counts = histogram(&phases, bins, 0.0, std::f64::consts::TAU)?;
    let chi = chi_square_uniform(&phases, bins, 0.0, std::f64::consts::TAU)?;
    let width = std::f64::consts::TAU / bins as f64;
    let mut hcsv = String::from("bin,lo_rad,hi_rad,count\n");
    for (b, n) in counts.iter().enumerate() {
        hcsv.push_str(&format!(
            "{b},{:.9},{:.9},{n}\n",
            b as f64 * width,
            (b + 1) as f64 * width
        ));
    }
    let hist_csv = with_suffix(&a.out, ".histogram.csv");
    let hist_svg = with_suffix(&a.out, ".histogram.svg");
    write(&hist_csv, &hcsv)?;
    write(
        &hist_svg,
        &figures::histogram(
            &format!("phase error of {} antennas ({mode})", a.antennas),
            &counts,
            0.0,
            std::f64::consts::TAU,
        ),
    )?;
    println!(
        "wrote {} and {}; grid range {:.4} rad",
        map_svg.display(),
        hist_svg.display(),
        hi - lo
    );
    let echo = json!({
        "antenna_id": a.antenna_id,
        "mode": mode,
        "grid_resolution_deg": a.grid_resolution,
        "antennas": a.antennas,
        "randomization": params,
    });
    let result = json!({
        "phase_svg": map_svg,
        "phase_csv": map_csv,
        "histogram_svg": hist_svg,
        "histogram_csv": hist_csv,
        "grid_min": lo,
        "grid_max": hi,
        "histogram_chi_square": chi.statistic,
        "histogram_p_value": chi.p_value,
    });
    finish(&a.out, clock.report(echo, result)?, true)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
