use std::collections::HashSet;

use caa_core::channel::ChannelParams;
use caa_core::dataset::{
    corpus_paths, decode, encode, generate_corpus, generate_corpus_to_file,
    generate_device_sessions, generate_records, read_corpus, write_corpus, CorpusConfig, Fnv1a64,
    Split, HEADER_LEN,
};
use caa_core::fingerprint::{Direction, FingerprintMode, RandomizationParams};
use caa_core::session::SessionRecord;
use caa_core::Error;
use proptest::prelude::*;

fn toy(seed: u64) -> CorpusConfig {
    CorpusConfig {
        num_devices: 2,
        sessions_per_device: 10,
        n_samples: 16,
        randomization: RandomizationParams::with_seed(seed),
        ..CorpusConfig::default()
    }
}

#[test]
fn generation_order_does_not_matter() {
    let cfg = toy(3);
    let forward = generate_records(&cfg, true).unwrap();
    let mut backward: Vec<SessionRecord> = (0..cfg.num_devices)
        .rev()
        .flat_map(|d| {
            generate_device_sessions(&cfg, d, false)
                .unwrap()
                .into_iter()
                .rev()
        })
        .collect();
    backward.sort_by_key(|r| (r.device_id, r.session_index));
    assert_eq!(
        encode(&cfg, &forward).unwrap(),
        encode(&cfg, &backward).unwrap()
    );
}

#[test]
fn parallel_and_sequential_generation_agree() {
    let cfg = toy(4);
    assert_eq!(
        generate_corpus(&cfg, true).unwrap().0,
        generate_corpus(&cfg, false).unwrap().0
    );
}

#[test]
fn streaming_writer_matches_in_memory_encoding() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy(5);
    let base = dir.path().join("c");
    let manifest = generate_corpus_to_file(&cfg, &base, true).unwrap();
    let (payload, m2) = generate_corpus(&cfg, true).unwrap();
    assert_eq!(manifest, m2);
    assert_eq!(std::fs::read(corpus_paths(&base).0).unwrap(), payload);
}

#[test]
fn file_round_trip_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy(6);
    let records = generate_records(&cfg, true).unwrap();
    let (payload, manifest) = generate_corpus(&cfg, true).unwrap();
    let base = dir.path().join("rt");
    write_corpus(&base, &payload, &manifest).unwrap();
    let corpus = read_corpus(&base).unwrap();
    assert_eq!(corpus.manifest, manifest);
    assert_eq!(corpus.records.len() as u64, manifest.num_records);
    for (a, b) in records.iter().zip(&corpus.records) {
        assert_eq!(
            (a.device_id, a.session_index),
            (b.device_id, b.session_index)
        );
        assert_eq!(a.direction.theta as f32, b.direction.theta as f32);
        assert_eq!(a.direction.phi as f32, b.direction.phi as f32);
        let bits = |r: &SessionRecord| r.samples.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
}

#[test]
fn every_device_is_in_every_split_and_no_session_is_shared() {
    let cfg = toy(7);
    let (payload, manifest) = generate_corpus(&cfg, true).unwrap();
    let (_, records) = decode(&payload, Some(manifest.checksum_value().unwrap())).unwrap();
    let mut seen = HashSet::new();
    for split in [Split::Train, Split::Val, Split::Test] {
        let devices: HashSet<u32> = records
            .iter()
            .filter(|r| cfg.split_of(r.session_index) == split)
            .map(|r| r.device_id)
            .collect();
        assert_eq!(devices.len(), 2, "{split:?}");
    }
    for r in &records {
        assert!(seen.insert((r.device_id, r.session_index)));
    }
    let c = manifest.split_counts;
    assert_eq!((c.train, c.val, c.test), (16, 2, 2));
}

#[test]
fn corrupted_magic_is_a_format_error() {
    let (mut payload, m) = generate_corpus(&toy(8), true).unwrap();
    payload[0] = b'X';
    assert!(matches!(
        decode(&payload, Some(m.checksum_value().unwrap())),
        Err(Error::Format(_))
    ));
}

#[test]
fn wrong_version_is_a_format_error() {
    let (mut payload, _) = generate_corpus(&toy(8), true).unwrap();
    payload[4] = 9;
    assert!(matches!(decode(&payload, None), Err(Error::Format(_))));
}

#[test]
fn truncation_is_a_length_error() {
    let (payload, m) = generate_corpus(&toy(9), true).unwrap();
    for cut in [1, 7, payload.len() - HEADER_LEN] {
        let short = &payload[..payload.len() - cut];
        assert!(
            matches!(
                decode(short, Some(m.checksum_value().unwrap())),
                Err(Error::Length { .. })
            ),
            "cut {cut}"
        );
    }
}

#[test]
fn flipped_sample_bit_is_a_corruption_error() {
    let (mut payload, m) = generate_corpus(&toy(10), true).unwrap();
    let last = payload.len() - 1;
    payload[last] ^= 0x01;
    assert!(matches!(
        decode(&payload, Some(m.checksum_value().unwrap())),
        Err(Error::Corruption { .. })
    ));
}

#[test]
fn damaged_file_on_disk_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("bad");
    let (payload, manifest) = generate_corpus(&toy(11), true).unwrap();
    write_corpus(&base, &payload[..payload.len() - 3], &manifest).unwrap();
    assert!(read_corpus(&base).is_err());
    assert!(read_corpus(&dir.path().join("missing")).is_err());
}

#[test]
fn same_config_gives_same_checksum() {
    let a = generate_corpus(&toy(12), true).unwrap().1;
    let b = generate_corpus(&toy(12), true).unwrap().1;
    let c = generate_corpus(&toy(13), true).unwrap().1;
    assert_eq!(a.checksum, b.checksum);
    assert_ne!(a.checksum, c.checksum);
}

#[test]
fn manifest_json_round_trips_infinite_snr() {
    let cfg = CorpusConfig {
        channel: ChannelParams::default().noiseless(),
        mode: FingerprintMode::Feedline,
        ..toy(14)
    };
    let (_, m) = generate_corpus(&cfg, true).unwrap();
    let json = serde_json::to_string(&m).unwrap();
    assert!(json.contains("\"snr_db\":null"));
    let back: caa_core::dataset::DatasetManifest = serde_json::from_str(&json).unwrap();
    assert_eq!(back, m);
}

fn arb_record(n: usize) -> impl Strategy<Value = (u32, u32, f32, f32, Vec<f32>)> {
    (
        any::<u32>(),
        any::<u32>(),
        0.0f32..1.3,
        -std::f32::consts::PI..std::f32::consts::PI,
        prop::collection::vec(any::<f32>(), n * 8),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_records_round_trip_bit_exactly(
        n in 1usize..6,
        seed in any::<u64>(),
        raw in prop::collection::vec(arb_record(5), 1..4),
    ) {
        let cfg = CorpusConfig {
            num_devices: raw.len() as u32,
            sessions_per_device: 1,
            n_samples: n as u32,
            randomization: RandomizationParams::with_seed(seed),
            ..CorpusConfig::default()
        };
        let records: Vec<SessionRecord> = raw
            .iter()
            .map(|(d, s, t, p, v)| SessionRecord {
                device_id: *d,
                session_index: *s,
                direction: Direction { theta: *t as f64, phi: *p as f64 },
                n_samples: n,
                samples: v[..n * 8].to_vec(),
            })
            .collect();
        let payload = encode(&cfg, &records).unwrap();
        prop_assert_eq!(payload.len() as u64, cfg.payload_len());
        let (header, back) = decode(&payload, Some(Fnv1a64::hash(&payload))).unwrap();
        prop_assert_eq!(header.n_samples, n as u32);
        prop_assert_eq!(encode(&cfg, &back).unwrap(), payload);
        for (a, b) in records.iter().zip(&back) {
            prop_assert_eq!(a.direction, b.direction);
            let bits = |r: &SessionRecord| r.samples.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(a), bits(b));
        }
    }
}
