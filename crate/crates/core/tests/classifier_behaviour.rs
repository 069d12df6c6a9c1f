use caa_core::classifier::{
    evaluate, gradient_check, load_checkpoint, save_checkpoint, train, Cnn3, Cnn3Spec, Examples,
    LrSchedule, TrainConfig,
};
use caa_core::dataset::{generate_records, CorpusConfig, Split};
use caa_core::fingerprint::RandomizationParams;

fn corpus(
    devices: u32,
    sessions: u32,
    n: u32,
    seed: u64,
) -> (CorpusConfig, Vec<caa_core::session::SessionRecord>) {
    let cfg = CorpusConfig {
        num_devices: devices,
        sessions_per_device: sessions,
        n_samples: n,
        randomization: RandomizationParams::with_seed(seed),
        ..CorpusConfig::default()
    };
    let records = generate_records(&cfg, true).unwrap();
    (cfg, records)
}

fn split(cfg: &CorpusConfig, records: &[caa_core::session::SessionRecord], s: Split) -> Examples {
    Examples::from_records(
        records
            .iter()
            .filter(|r| cfg.split_of(r.session_index) == s),
    )
    .unwrap()
}

fn all(records: &[caa_core::session::SessionRecord]) -> Examples {
    Examples::from_records(records).unwrap()
}

#[test]
fn untrained_model_is_near_chance() {
    let (cfg, recs) = corpus(30, 20, 1000, 1);
    let test = split(&cfg, &recs, Split::Test);
    let model = Cnn3::<f32>::init(Cnn3Spec::reference(1000, 30), 5).unwrap();
    let m = evaluate(&model, &test, true).unwrap();
    assert!(m.accuracy <= 0.15, "{}", m.accuracy);
    for (c, row) in m.confusion.iter().enumerate() {
        assert_eq!(
            row.iter().sum::<u64>(),
            test.labels.iter().filter(|&&l| l == c).count() as u64
        );
    }
}

#[test]
fn single_device_is_always_recognised() {
    let (cfg, recs) = corpus(1, 10, 64, 2);
    let model = Cnn3::<f32>::init(Cnn3Spec::reference(64, 1), 1).unwrap();
    let m = evaluate(&model, &split(&cfg, &recs, Split::Test), true).unwrap();
    assert_eq!(m.accuracy, 1.0);
}

#[test]
fn two_device_toy_is_memorised() {
    let (_, recs) = corpus(2, 10, 64, 3);
    let data = all(&recs);
    let model = Cnn3::<f32>::init(Cnn3Spec::reference(64, 2), 3).unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        patience: 30,
        schedule: LrSchedule::Constant,
        seed: 3,
        ..TrainConfig::default()
    };
    let (_, h) = train(model, &data, &data, &cfg).unwrap();
    assert!(
        h.epochs.iter().any(|e| e.train_accuracy == 1.0),
        "{:?}",
        h.epochs.last()
    );
}

#[test]
fn training_loss_mostly_decreases() {
    let (_, recs) = corpus(2, 10, 64, 4);
    let data = all(&recs);
    let model = Cnn3::<f32>::init(Cnn3Spec::reference(64, 2), 4).unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        patience: 30,
        schedule: LrSchedule::Constant,
        seed: 4,
        ..TrainConfig::default()
    };
    let (_, h) = train(model, &data, &data, &cfg).unwrap();
    let losses: Vec<f64> = h.epochs.iter().map(|e| e.train_loss).collect();
    let down = losses.windows(2).filter(|w| w[1] <= w[0]).count();
    assert!(down as f64 >= 0.9 * (losses.len() - 1) as f64, "{losses:?}");
}

#[test]
fn deterministic_training_is_repeatable_and_thread_independent() {
    let (cfg, recs) = corpus(3, 10, 64, 5);
    let tr = split(&cfg, &recs, Split::Train);
    let va = split(&cfg, &recs, Split::Val);
    let spec = Cnn3Spec {
        filters1: 8,
        filters2: 8,
        ..Cnn3Spec::reference(64, 3)
    };
    let run = |deterministic| {
        let tc = TrainConfig {
            epochs: 4,
            seed: 9,
            deterministic,
            ..TrainConfig::default()
        };
        train(Cnn3::<f32>::init(spec, 9).unwrap(), &tr, &va, &tc)
            .unwrap()
            .0
    };
    let a = run(true);
    let b = run(true);
    let c = run(false);
    assert_eq!(a.params(), b.params());
    assert_eq!(a.params(), c.params());
}

#[test]
fn permuting_labels_does_not_change_accuracy() {
    let (cfg, recs) = corpus(3, 20, 64, 6);
    let tr = split(&cfg, &recs, Split::Train);
    let va = split(&cfg, &recs, Split::Val);
    let te = split(&cfg, &recs, Split::Test);
    let perm = [2, 0, 1];
    let tc = TrainConfig {
        epochs: 30,
        patience: 30,
        seed: 6,
        ..TrainConfig::default()
    };
    let spec = Cnn3Spec::reference(64, 3);
    let (m1, _) = train(Cnn3::<f32>::init(spec, 6).unwrap(), &tr, &va, &tc).unwrap();
    let (m2, _) = train(
        Cnn3::<f32>::init(spec, 6).unwrap(),
        &tr.permute_labels(&perm),
        &va.permute_labels(&perm),
        &tc,
    )
    .unwrap();
    let a1 = evaluate(&m1, &te, true).unwrap().accuracy;
    let a2 = evaluate(&m2, &te.permute_labels(&perm), true)
        .unwrap()
        .accuracy;
    assert_eq!(a1, a2);
}

#[test]
fn outputs_are_distributions_and_batch_order_is_irrelevant() {
    let (_, recs) = corpus(2, 10, 64, 7);
    let data = all(&recs);
    let model = Cnn3::<f32>::init(Cnn3Spec::reference(64, 5), 7).unwrap();
    let out = model.forward(&data.inputs, true).unwrap();
    assert_eq!(out.len(), data.len());
    for p in &out {
        let s: f64 = p.iter().map(|&v| v as f64).sum();
        assert!((s - 1.0).abs() < 1e-6);
    }
    let len = 64 * 8;
    let mut reversed = Vec::with_capacity(data.inputs.len());
    for i in (0..data.len()).rev() {
        reversed.extend_from_slice(&data.inputs[i * len..(i + 1) * len]);
    }
    let back = model.forward(&reversed, false).unwrap();
    for (i, p) in back.iter().enumerate() {
        assert_eq!(p, &out[data.len() - 1 - i]);
    }
}

#[test]
fn gradients_match_finite_differences() {
    let spec = Cnn3Spec {
        n_rows: 36,
        filters1: 2,
        filters2: 2,
        num_classes: 3,
    };
    for seed in 0..3 {
        let r = gradient_check(spec, 1e-5, seed).unwrap();
        assert!(r.max_relative_error < 1e-4, "{r:?}");
        assert_eq!(r.per_tensor.len(), 6);
    }
}

#[test]
fn checkpoints_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let model = Cnn3::<f32>::init(Cnn3Spec::reference(64, 4), 8).unwrap();
    let path = dir.path().join("m.caam");
    save_checkpoint(&model, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.spec(), model.spec());
    assert_eq!(back.params(), model.params());
}
