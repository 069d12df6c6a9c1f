use std::hint::black_box;

use caa_core::channel::ChannelParams;
use caa_core::classifier::{Cnn3, Cnn3Spec};
use caa_core::dataset::{generate_corpus, CorpusConfig};
use caa_core::validation::{self, FadingCheck};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

const MODES: [(&str, bool); 2] = [("sequential", false), ("parallel", true)];

fn corpus_generation(c: &mut Criterion) {
    let cfg = CorpusConfig {
        num_devices: 4,
        sessions_per_device: 16,
        ..CorpusConfig::default()
    };
    let mut g = c.benchmark_group("corpus_generation");
    g.sample_size(10);
    g.throughput(Throughput::Elements(cfg.num_records()));
    for (name, parallel) in MODES {
        g.bench_with_input(BenchmarkId::new(name, "4x16x1000"), &parallel, |b, &p| {
            b.iter(|| generate_corpus(black_box(&cfg), p).unwrap())
        });
    }
    g.finish();
}

fn cnn_forward(c: &mut Criterion) {
    let model = Cnn3::<f32>::init(Cnn3Spec::reference(1000, 30), 1).unwrap();
    let batch: Vec<f32> = (0..32 * 8000).map(|i| ((i as f32) * 0.013).sin()).collect();
    let mut g = c.benchmark_group("cnn_forward");
    g.sample_size(10);
    g.throughput(Throughput::Elements(32));
    for (name, parallel) in MODES {
        g.bench_with_input(BenchmarkId::new(name, "batch32"), &parallel, |b, &p| {
            b.iter(|| model.forward(black_box(&batch), p).unwrap())
        });
    }
    g.finish();
}

fn fading_monte_carlo(c: &mut Criterion) {
    let ch = ChannelParams::default();
    let check = FadingCheck {
        traces: 64,
        ..FadingCheck::default()
    };
    let mut g = c.benchmark_group("fading_autocorrelation");
    g.sample_size(10);
    for (name, parallel) in MODES {
        g.bench_with_input(BenchmarkId::new(name, "64 traces"), &parallel, |b, &p| {
            b.iter(|| validation::channel_autocorrelation(black_box(&ch), &check, p).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, corpus_generation, cnn_forward, fading_monte_carlo);
criterion_main!(benches);
