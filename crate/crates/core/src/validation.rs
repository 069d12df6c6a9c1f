//! Statistical validation suites for the fingerprint and channel models.
//!
//! Each suite returns a [`ValidationReport`] with its statistics and a
//! pass/fail verdict against a fixed threshold.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::channel::{self, coherence_time, doppler_shift, ChannelParams};
use crate::dataset::CorpusConfig;
use crate::fingerprint::{
    build_device, synthesize_phase_field, FingerprintMode, RandomizationParams,
};
use crate::seed::{self, tag};
use crate::session::{clean_bursts, generate_session, sample_direction, SnrMeter};
use crate::stats::{self, bessel_j0, chi_square_uniform, ks_test, rayleigh_cdf};
use crate::{par, Result};

/// Significance level used by every hypothesis test here.
pub const ALPHA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub name: String,
    pub passed: bool,
    pub values: Vec<(String, f64)>,
}

impl ValidationReport {
    fn new(name: &str, passed: bool, values: Vec<(&str, f64)>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            values: values
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        }
    }

    pub fn value(&self, key: &str) -> Option<f64> {
        self.values.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn summary(&self) -> String {
        let vals: Vec<String> = self
            .values
            .iter()
            .map(|(k, v)| format!("{k}={v:.6}"))
            .collect();
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            vals.join(" ")
        )
    }
}

/// Phase error of antennas `0..antennas`, each towards its own random
/// direction.
pub fn sampled_phases(
    params: &RandomizationParams,
    mode: FingerprintMode,
    antennas: u64,
    direction_seed: u64,
) -> Result<Vec<f64>> {
    (0..antennas)
        .map(|id| {
            let field = synthesize_phase_field(params, id, mode);
            let dir = sample_direction(seed::derive(direction_seed, &[tag::DIRECTION, id]));
            field.eval(&dir)
        })
        .collect()
}

/// Chi-square uniformity of geometry-mode phase errors over 36 bins.
pub fn phase_uniformity(
    params: &RandomizationParams,
    antennas: u64,
    direction_seed: u64,
) -> Result<ValidationReport> {
    let phases = sampled_phases(params, FingerprintMode::Geometry, antennas, direction_seed)?;
    let t = chi_square_uniform(&phases, 36, 0.0, TAU)?;
    Ok(ValidationReport::new(
        "phase-uniformity",
        t.passes(ALPHA),
        vec![
            ("antennas", antennas as f64),
            ("chi_square", t.statistic),
            ("dof", t.dof as f64),
            ("p_value", t.p_value),
        ],
    ))
}

/// Settings for the fading-channel Monte Carlo suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingCheck {
    pub traces: usize,
    pub trace_len: usize,
    /// Rate the traces are sampled at; lower than the session rate so that
    /// lags out to twice the coherence time stay cheap.
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl Default for FadingCheck {
    fn default() -> Self {
        Self {
            traces: 400,
            trace_len: 4000,
            sample_rate_hz: 2000.0,
            seed: 0x0a0c,
        }
    }
}

fn traces(
    params: &ChannelParams,
    check: &FadingCheck,
    parallel: bool,
) -> Result<Vec<Vec<num_complex::Complex64>>> {
    let p = ChannelParams {
        sample_rate_hz: check.sample_rate_hz,
        ..*params
    };
    par::map_range(0..check.traces, parallel, |i| {
        channel::generate_fading(
            &p,
            check.trace_len,
            seed::derive(check.seed, &[tag::FADING, i as u64]),
        )
        .map(|t| t.samples)
    })
    .into_iter()
    .collect()
}

/// Empirical autocorrelation against `J0(2 pi f_d tau)` for
/// `tau in [0, 2 T_c]`; passes when the largest deviation is at most 0.05.
pub fn channel_autocorrelation(
    params: &ChannelParams,
    check: &FadingCheck,
    parallel: bool,
) -> Result<ValidationReport> {
    let fd = doppler_shift(params);
    let tc = coherence_time(fd)?;
    let max_lag = (2.0 * tc * check.sample_rate_hz).ceil() as usize;
    let tr = traces(params, check, parallel)?;
    let r = stats::mean_autocorrelation(&tr, max_lag)?;
    let mut worst: f64 = 0.0;
    for (lag, v) in r.iter().enumerate() {
        let tau = lag as f64 / check.sample_rate_hz;
        if tau <= 2.0 * tc {
            worst = worst.max((v - bessel_j0(TAU * fd * tau)).abs());
        }
    }
    Ok(ValidationReport::new(
        "channel-autocorr",
        worst <= 0.05,
        vec![
            ("doppler_hz", fd),
            ("coherence_time_s", tc),
            ("max_lag", max_lag as f64),
            ("max_abs_deviation", worst),
        ],
    ))
}

/// Mean power over all samples of the check traces, within 2 % of
/// `sigma_h_sq`.
pub fn channel_power(
    params: &ChannelParams,
    check: &FadingCheck,
    parallel: bool,
) -> Result<ValidationReport> {
    let tr = traces(params, check, parallel)?;
    let n: usize = tr.iter().map(Vec::len).sum();
    let power = tr.iter().flatten().map(|h| h.norm_sqr()).sum::<f64>() / n as f64;
    let rel = (power - params.sigma_h_sq).abs() / params.sigma_h_sq;
    Ok(ValidationReport::new(
        "channel-power",
        rel <= 0.02,
        vec![
            ("samples", n as f64),
            ("mean_power", power),
            ("relative_error", rel),
        ],
    ))
}

/// KS test of `|h|` against Rayleigh with scale `sqrt(sigma_h^2 / 2)` and
/// chi-square uniformity of `arg h` over 36 bins. One sample per
/// independent trace.
pub fn rayleigh_envelope(
    params: &ChannelParams,
    draws: usize,
    draw_seed: u64,
    parallel: bool,
) -> Result<ValidationReport> {
    let hs: Vec<num_complex::Complex64> = par::map_range(0..draws, parallel, |i| {
        channel::generate_fading(params, 1, seed::derive(draw_seed, &[tag::FADING, i as u64]))
            .map(|t| t.samples[0])
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let sigma = (params.sigma_h_sq / 2.0).sqrt();
    let env: Vec<f64> = hs.iter().map(|h| h.norm()).collect();
    let ks = ks_test(&env, |x| rayleigh_cdf(x, sigma))?;
    let phases: Vec<f64> = hs.iter().map(|h| h.arg().clamp(-PI, PI)).collect();
    let chi = chi_square_uniform(&phases, 36, -PI, PI)?;
    Ok(ValidationReport::new(
        "rayleigh-ks",
        ks.passes(ALPHA) && chi.passes(ALPHA),
        vec![
            ("draws", draws as f64),
            ("ks_statistic", ks.statistic),
            ("ks_p_value", ks.p_value),
            ("phase_chi_square", chi.statistic),
            ("phase_p_value", chi.p_value),
        ],
    ))
}

/// Received SNR of `sessions` sessions drawn as in a corpus, measured
/// against their noiseless counterparts. Passes within 0.3 dB of the
/// configured value.
pub fn snr_calibration(
    config: &CorpusConfig,
    sessions: u32,
    parallel: bool,
) -> Result<ValidationReport> {
    config.validate()?;
    let n = config.n_samples as usize;
    // device-major walk over the corpus
    let jobs: Vec<(u32, u32)> = (0..sessions)
        .map(|i| (i % config.num_devices, i / config.num_devices))
        .collect();
    let meters = par::map(&jobs, parallel, |&(d, s)| -> Result<SnrMeter> {
        let device = build_device(&config.randomization, d as u64, config.mode);
        let ss = config.session_seed(d, s);
        let dir = sample_direction(seed::derive(ss, &[tag::DIRECTION]));
        let clean = clean_bursts(&device, &dir, &config.channel, n, ss)?;
        let rec = generate_session(&device, &dir, &config.channel, n, s, ss)?;
        let mut m = SnrMeter::default();
        for (k, burst) in clean.iter().enumerate() {
            m.push(burst, rec.element(k));
        }
        Ok(m)
    });
    let mut total = SnrMeter::default();
    let mut signal = 0.0;
    for m in meters {
        let m = m?;
        signal += m.signal_power_sum();
        total = total.merge(&m);
    }
    let measured = total.snr_db();
    let target = config.channel.snr_db;
    let samples = sessions as f64 * 4.0 * n as f64;
    Ok(ValidationReport::new(
        "snr",
        (measured - target).abs() <= 0.3,
        vec![
            ("sessions", sessions as f64),
            ("target_db", target),
            ("noise_variance", config.channel.noise_variance()),
            ("mean_signal_power", signal / samples),
            ("measured_db", measured),
        ],
    ))
}

/// SNR of a unit-power tone after [`channel::add_noise`], over `len` samples.
pub fn awgn_calibration(snr_db: f64, len: usize, noise_seed: u64) -> Result<ValidationReport> {
    let sig: Vec<num_complex::Complex64> = (0..len)
        .map(|i| num_complex::Complex64::from_polar(1.0, 0.001 * i as f64))
        .collect();
    let noisy = channel::add_noise(&sig, snr_db, 1.0, noise_seed)?;
    let mut m = SnrMeter::default();
    m.push(&sig, noisy.into_iter());
    let measured = m.snr_db();
    Ok(ValidationReport::new(
        "awgn",
        (measured - snr_db).abs() <= 0.3,
        vec![
            ("samples", len as f64),
            ("target_db", snr_db),
            ("measured_db", measured),
        ],
    ))
}
