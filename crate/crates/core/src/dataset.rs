//! Corpus generation, splitting and the `.caad` file format.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic            4 bytes  "CAAD"
//! format_version   u16
//! num_devices      u32
//! sessions_per_dev u32
//! n_samples        u32
//! num_columns      u32      (= 8)
//! records, sorted by (device_id, session_index):
//!   device_id      u32
//!   session_index  u32
//!   theta          f32      radians
//!   phi            f32      radians
//!   samples        n_samples * 8 f32, row-major
//! ```
//!
//! The manifest (`<name>.manifest.json`) echoes the generating config, the
//! split counts and an FNV-1a 64 checksum of the whole `.caad` file.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::fingerprint::{build_device, Direction, FingerprintMode, RandomizationParams};
use crate::par;
use crate::seed::{self, tag};
use crate::session::{generate_session, sample_direction, SessionRecord, NUM_COLUMNS};
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CAAD";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 4 * 4;
pub const CHECKSUM_ALGORITHM: &str = "fnv1a64";

/// Incremental FNV-1a 64-bit hash.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a64(u64);

impl Default for Fnv1a64 {
    fn default() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv1a64 {
    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }

    pub fn hash(bytes: &[u8]) -> u64 {
        let mut h = Self::default();
        h.update(bytes);
        h.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: u64,
    pub val: u64,
    pub test: u64,
}

impl SplitCounts {
    pub fn total(&self) -> u64 {
        self.train + self.val + self.test
    }

    fn scaled(self, k: u64) -> Self {
        Self {
            train: self.train * k,
            val: self.val * k,
            test: self.test * k,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::invalid(
                "split_fractions",
                "every fraction must be > 0",
            ));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("split_fractions", "fractions must sum to 1"));
        }
        Ok(())
    }

    /// Per-device session counts. Validation and test get at least one
    /// session each; training takes the remainder.
    pub fn per_device(&self, sessions: u64) -> SplitCounts {
        let val = ((sessions as f64 * self.val).round() as u64).max(1);
        let test = ((sessions as f64 * self.test).round() as u64).max(1);
        SplitCounts {
            train: sessions.saturating_sub(val + test),
            val,
            test,
        }
    }

    /// Split of the `session_index`-th session of a device.
    pub fn assign(&self, sessions: u64, session_index: u64) -> Split {
        let c = self.per_device(sessions);
        if session_index < c.train {
            Split::Train
        } else if session_index < c.train + c.val {
            Split::Val
        } else {
            Split::Test
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub num_devices: u32,
    pub sessions_per_device: u32,
    pub n_samples: u32,
    pub mode: FingerprintMode,
    pub channel: ChannelParams,
    /// Patch and phase-field parameters; its `master_seed` seeds the corpus.
    pub randomization: RandomizationParams,
    pub split_fractions: SplitFractions,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            num_devices: 300,
            sessions_per_device: 100,
            n_samples: 1000,
            mode: FingerprintMode::Geometry,
            channel: ChannelParams::default(),
            randomization: RandomizationParams::default(),
            split_fractions: SplitFractions::default(),
        }
    }
}

impl CorpusConfig {
    pub fn master_seed(&self) -> u64 {
        self.randomization.master_seed
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_devices == 0 {
            return Err(Error::invalid("num_devices", "must be at least 1"));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples", "must be at least 1"));
        }
        self.split_fractions.validate()?;
        if self
            .split_fractions
            .per_device(self.sessions_per_device as u64)
            .train
            == 0
        {
            return Err(Error::invalid(
                "sessions_per_device",
                "too few sessions to give every split at least one",
            ));
        }
        self.channel.validate()?;
        self.randomization.validate()
    }

    pub fn num_records(&self) -> u64 {
        self.num_devices as u64 * self.sessions_per_device as u64
    }

    pub fn record_len(&self) -> usize {
        record_len(self.n_samples as usize)
    }

    pub fn payload_len(&self) -> u64 {
        HEADER_LEN as u64 + self.num_records() * self.record_len() as u64
    }

    pub fn split_counts(&self) -> SplitCounts {
        self.split_fractions
            .per_device(self.sessions_per_device as u64)
            .scaled(self.num_devices as u64)
    }

    pub fn split_of(&self, session_index: u32) -> Split {
        self.split_fractions
            .assign(self.sessions_per_device as u64, session_index as u64)
    }

    /// Stream seed of one session, independent of generation order.
    pub fn session_seed(&self, device_id: u32, session_index: u32) -> u64 {
        seed::derive(
            self.master_seed(),
            &[tag::SESSION, device_id as u64, session_index as u64],
        )
    }
}

fn record_len(n_samples: usize) -> usize {
    4 + 4 + 4 + 4 + n_samples * NUM_COLUMNS * 4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u16,
    pub config: CorpusConfig,
    pub num_records: u64,
    pub split_counts: SplitCounts,
    pub payload_bytes: u64,
    pub checksum_algorithm: String,
    /// Hex-encoded checksum of the `.caad` file, `0x` prefixed.
    pub checksum: String,
}

impl DatasetManifest {
    pub fn new(config: &CorpusConfig, checksum: u64) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            config: config.clone(),
            num_records: config.num_records(),
            split_counts: config.split_counts(),
            payload_bytes: config.payload_len(),
            checksum_algorithm: CHECKSUM_ALGORITHM.to_string(),
            checksum: format!("{checksum:#018x}"),
        }
    }

    pub fn checksum_value(&self) -> Result<u64> {
        let hex = self.checksum.trim_start_matches("0x");
        u64::from_str_radix(hex, 16)
            .map_err(|_| Error::Format(format!("bad checksum `{}` in manifest", self.checksum)))
    }
}

/// Builds the sessions of one device.
pub fn generate_device_sessions(
    config: &CorpusConfig,
    device_id: u32,
    parallel: bool,
) -> Result<Vec<SessionRecord>> {
    let device = build_device(&config.randomization, device_id as u64, config.mode);
    let n = config.n_samples as usize;
    par::map_range(0..config.sessions_per_device as usize, parallel, |s| {
        let s = s as u32;
        let session_seed = config.session_seed(device_id, s);
        let dir = sample_direction(seed::derive(session_seed, &[tag::DIRECTION]));
        generate_session(&device, &dir, &config.channel, n, s, session_seed)
    })
    .into_iter()
    .collect()
}

/// Generates every session of the corpus, sorted by `(device_id, session_index)`.
pub fn generate_records(config: &CorpusConfig, parallel: bool) -> Result<Vec<SessionRecord>> {
    config.validate()?;
    let per_device = par::map_range(0..config.num_devices as usize, parallel, |d| {
        generate_device_sessions(config, d as u32, false)
    });
    let mut out = Vec::with_capacity(config.num_records() as usize);
    for sessions in per_device {
        out.extend(sessions?);
    }
    Ok(out)
}

fn encode_header(config: &CorpusConfig) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[..4].copy_from_slice(&MAGIC);
    h[4..6].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
    h[6..10].copy_from_slice(&config.num_devices.to_le_bytes());
    h[10..14].copy_from_slice(&config.sessions_per_device.to_le_bytes());
    h[14..18].copy_from_slice(&config.n_samples.to_le_bytes());
    h[18..22].copy_from_slice(&(NUM_COLUMNS as u32).to_le_bytes());
    h
}

fn encode_record(r: &SessionRecord, out: &mut Vec<u8>) {
    out.extend_from_slice(&r.device_id.to_le_bytes());
    out.extend_from_slice(&r.session_index.to_le_bytes());
    out.extend_from_slice(&(r.direction.theta as f32).to_le_bytes());
    out.extend_from_slice(&(r.direction.phi as f32).to_le_bytes());
    for v in &r.samples {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes `records` (which must already be sorted) under `config`.
pub fn encode(config: &CorpusConfig, records: &[SessionRecord]) -> Result<Vec<u8>> {
    if records.len() as u64 != config.num_records() {
        return Err(Error::Shape(format!(
            "config expects {} records, got {}",
            config.num_records(),
            records.len()
        )));
    }
    let mut out = Vec::with_capacity(config.payload_len() as usize);
    out.extend_from_slice(&encode_header(config));
    for r in records {
        if r.n_samples != config.n_samples as usize || r.samples.len() != r.n_samples * NUM_COLUMNS
        {
            return Err(Error::Shape(format!(
                "record ({}, {}) has {} samples, expected {} x {NUM_COLUMNS}",
                r.device_id,
                r.session_index,
                r.samples.len(),
                config.n_samples
            )));
        }
        encode_record(r, &mut out);
    }
    Ok(out)
}

/// Generates the corpus in memory: the `.caad` payload and its manifest.
pub fn generate_corpus(
    config: &CorpusConfig,
    parallel: bool,
) -> Result<(Vec<u8>, DatasetManifest)> {
    let records = generate_records(config, parallel)?;
    let payload = encode(config, &records)?;
    let manifest = DatasetManifest::new(config, Fnv1a64::hash(&payload));
    Ok((payload, manifest))
}

/// File paths for a corpus base name. A trailing `.caad` is ignored.
pub fn corpus_paths(base: &Path) -> (PathBuf, PathBuf) {
    let stem = if base.extension().is_some_and(|e| e == "caad") {
        base.with_extension("")
    } else {
        base.to_path_buf()
    };
    let mut data = stem.clone().into_os_string();
    data.push(".caad");
    let mut manifest = stem.into_os_string();
    manifest.push(".manifest.json");
    (data.into(), manifest.into())
}

fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    let json = serde_json::to_vec_pretty(manifest).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn write_corpus(base: &Path, payload: &[u8], manifest: &DatasetManifest) -> Result<()> {
    let (data_path, manifest_path) = corpus_paths(base);
    std::fs::write(&data_path, payload).map_err(|e| Error::io(&data_path, e))?;
    write_manifest(&manifest_path, manifest)
}

/// Generates and writes the corpus one device at a time, so memory stays
/// bounded by a single device's sessions. Produces the same bytes as
/// [`generate_corpus`] followed by [`write_corpus`].
pub fn generate_corpus_to_file(
    config: &CorpusConfig,
    base: &Path,
    parallel: bool,
) -> Result<DatasetManifest> {
    config.validate()?;
    let (data_path, manifest_path) = corpus_paths(base);
    let file = File::create(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let mut w = BufWriter::new(file);
    let mut hash = Fnv1a64::default();
    let header = encode_header(config);
    hash.update(&header);
    w.write_all(&header).map_err(|e| Error::io(&data_path, e))?;
    let mut buf = Vec::with_capacity(config.record_len());
    for d in 0..config.num_devices {
        for r in generate_device_sessions(config, d, parallel)? {
            buf.clear();
            encode_record(&r, &mut buf);
            hash.update(&buf);
            w.write_all(&buf).map_err(|e| Error::io(&data_path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&data_path, e))?;
    let manifest = DatasetManifest::new(config, hash.finish());
    write_manifest(&manifest_path, &manifest)?;
    Ok(manifest)
}

/// Parsed `.caad` header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusHeader {
    pub format_version: u16,
    pub num_devices: u32,
    pub sessions_per_device: u32,
    pub n_samples: u32,
    pub num_columns: u32,
}

impl CorpusHeader {
    pub fn num_records(&self) -> u64 {
        self.num_devices as u64 * self.sessions_per_device as u64
    }
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn le_f32(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

/// Validates and decodes a complete `.caad` payload. Nothing is decoded
/// unless the header, length and (when given) checksum all check out.
pub fn decode(
    payload: &[u8],
    expected_checksum: Option<u64>,
) -> Result<(CorpusHeader, Vec<SessionRecord>)> {
    if payload.len() < HEADER_LEN {
        if payload.len() >= 4 && payload[..4] != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        return Err(Error::Length {
            expected: HEADER_LEN as u64,
            found: payload.len() as u64,
        });
    }
    if payload[..4] != MAGIC {
        return Err(Error::Format(format!(
            "bad magic bytes {:02x?}, expected {:02x?}",
            &payload[..4],
            MAGIC
        )));
    }
    let format_version = u16::from_le_bytes([payload[4], payload[5]]);
    if format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {format_version}, expected {FORMAT_VERSION}"
        )));
    }
    let header = CorpusHeader {
        format_version,
        num_devices: le_u32(payload, 6),
        sessions_per_device: le_u32(payload, 10),
        n_samples: le_u32(payload, 14),
        num_columns: le_u32(payload, 18),
    };
    if header.num_columns != NUM_COLUMNS as u32 {
        return Err(Error::Format(format!(
            "expected {NUM_COLUMNS} columns, header says {}",
            header.num_columns
        )));
    }
    let rec_len = record_len(header.n_samples as usize);
    let expected = HEADER_LEN as u64 + header.num_records() * rec_len as u64;
    if payload.len() as u64 != expected {
        return Err(Error::Length {
            expected,
            found: payload.len() as u64,
        });
    }
    if let Some(expected) = expected_checksum {
        let found = Fnv1a64::hash(payload);
        if found != expected {
            return Err(Error::Corruption { expected, found });
        }
    }

    let n = header.n_samples as usize;
    let records = payload[HEADER_LEN..]
        .chunks_exact(rec_len)
        .map(|b| SessionRecord {
            device_id: le_u32(b, 0),
            session_index: le_u32(b, 4),
            direction: Direction {
                theta: le_f32(b, 8) as f64,
                phi: le_f32(b, 12) as f64,
            },
            n_samples: n,
            samples: b[16..]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        })
        .collect();
    Ok((header, records))
}

/// Loaded corpus: manifest plus records in file order.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub header: CorpusHeader,
    pub manifest: DatasetManifest,
    pub records: Vec<SessionRecord>,
}

impl Corpus {
    pub fn num_classes(&self) -> usize {
        self.header.num_devices as usize
    }

    pub fn split(&self, which: Split) -> impl Iterator<Item = &SessionRecord> {
        self.records
            .iter()
            .filter(move |r| self.manifest.config.split_of(r.session_index) == which)
    }
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `<base>.caad` and `<base>.manifest.json`.
pub fn read_corpus(base: &Path) -> Result<Corpus> {
    let (data_path, manifest_path) = corpus_paths(base);
    let manifest = read_manifest(&manifest_path)?;
    let mut payload = Vec::new();
    File::open(&data_path)
        .and_then(|mut f| f.read_to_end(&mut payload))
        .map_err(|e| Error::io(&data_path, e))?;
    let (header, records) = decode(&payload, Some(manifest.checksum_value()?))?;
    let cfg = &manifest.config;
    if header.num_devices != cfg.num_devices
        || header.sessions_per_device != cfg.sessions_per_device
        || header.n_samples != cfg.n_samples
        || records.len() as u64 != manifest.num_records
    {
        return Err(Error::Format(format!(
            "{} disagrees with its manifest",
            data_path.display()
        )));
    }
    Ok(Corpus {
        header,
        manifest,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> CorpusConfig {
        CorpusConfig {
            num_devices: 2,
            sessions_per_device: 10,
            n_samples: 4,
            randomization: RandomizationParams::with_seed(13),
            ..CorpusConfig::default()
        }
    }

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(Fnv1a64::hash(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(Fnv1a64::hash(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(Fnv1a64::hash(b"foobar"), 0x8594_4171_f739_67e8);
    }

    #[test]
    fn split_counts() {
        let f = SplitFractions::default();
        assert_eq!(
            f.per_device(100),
            SplitCounts {
                train: 80,
                val: 10,
                test: 10
            }
        );
        assert_eq!(
            f.per_device(80),
            SplitCounts {
                train: 64,
                val: 8,
                test: 8
            }
        );
        assert_eq!(
            f.per_device(4),
            SplitCounts {
                train: 2,
                val: 1,
                test: 1
            }
        );
        let cfg = CorpusConfig::default();
        assert_eq!(
            cfg.split_counts(),
            SplitCounts {
                train: 24000,
                val: 3000,
                test: 3000
            }
        );
        assert_eq!(cfg.num_records(), 30000);
    }

    #[test]
    fn split_assignment_is_by_session_index() {
        let f = SplitFractions::default();
        let splits: Vec<Split> = (0..10).map(|i| f.assign(10, i)).collect();
        assert_eq!(&splits[..8], &[Split::Train; 8]);
        assert_eq!(splits[8], Split::Val);
        assert_eq!(splits[9], Split::Test);
    }

    #[test]
    fn config_validation() {
        let mut c = toy();
        c.sessions_per_device = 2;
        assert!(c.validate().is_err());
        c.sessions_per_device = 3;
        assert!(c.validate().is_ok());
        c.split_fractions.train = 0.7;
        assert!(c.validate().is_err());
    }

    #[test]
    fn toy_payload_size() {
        let cfg = toy();
        let (payload, manifest) = generate_corpus(&cfg, true).unwrap();
        assert_eq!(payload.len(), HEADER_LEN + 20 * (16 + 4 * 8 * 4));
        assert_eq!(manifest.num_records, 20);
        assert_eq!(manifest.payload_bytes, payload.len() as u64);
        assert_eq!(manifest.checksum_value().unwrap(), Fnv1a64::hash(&payload));
    }

    #[test]
    fn decode_round_trip() {
        let cfg = toy();
        let records = generate_records(&cfg, false).unwrap();
        let payload = encode(&cfg, &records).unwrap();
        let (header, back) = decode(&payload, None).unwrap();
        assert_eq!(header.num_records(), 20);
        for (a, b) in records.iter().zip(&back) {
            assert_eq!(a.samples, b.samples);
            assert_eq!(
                (a.device_id, a.session_index),
                (b.device_id, b.session_index)
            );
            assert_eq!(a.direction.theta as f32, b.direction.theta as f32);
        }
    }

    #[test]
    fn decode_rejections() {
        let cfg = toy();
        let (payload, manifest) = generate_corpus(&cfg, false).unwrap();
        let sum = manifest.checksum_value().unwrap();

        let mut bad = payload.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad, Some(sum)), Err(Error::Format(_))));

        let mut bad = payload.clone();
        bad[4] = 9;
        assert!(matches!(decode(&bad, Some(sum)), Err(Error::Format(_))));

        let short = &payload[..payload.len() - 3];
        assert!(matches!(
            decode(short, Some(sum)),
            Err(Error::Length { .. })
        ));
        assert!(matches!(
            decode(&payload[..10], None),
            Err(Error::Length { .. })
        ));

        let mut bad = payload.clone();
        let last = bad.len() - 1;
        bad[last] ^= 0x40;
        assert!(matches!(
            decode(&bad, Some(sum)),
            Err(Error::Corruption { .. })
        ));
    }

    #[test]
    fn paths() {
        let (d, m) = corpus_paths(Path::new("out/t"));
        assert_eq!(d, PathBuf::from("out/t.caad"));
        assert_eq!(m, PathBuf::from("out/t.manifest.json"));
        let (d, _) = corpus_paths(Path::new("out/t.caad"));
        assert_eq!(d, PathBuf::from("out/t.caad"));
    }

    #[test]
    fn records_are_sorted() {
        let recs = generate_records(&toy(), true).unwrap();
        let keys: Vec<(u32, u32)> = recs
            .iter()
            .map(|r| (r.device_id, r.session_index))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }
}
