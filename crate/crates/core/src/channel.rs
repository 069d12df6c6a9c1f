//! Flat Rayleigh fading under Clarke's isotropic-scattering model, plus AWGN.
//!
//! Fading is synthesized as a sum of `M` unit phasors with uniformly
//! distributed arrival angles and phases:
//!
//! ```text
//! h[n] = sqrt(sigma_h^2 / M) * sum_m exp(j (2 pi f_d cos(gamma_m) n / fs + chi_m))
//! ```
//!
//! whose ensemble autocorrelation is `sigma_h^2 * J0(2 pi f_d tau)`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::{Error, Result, SPEED_OF_LIGHT};

/// How fading traces are shared between the elements of one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelCoupling {
    /// One continuous trace spans the sequential bursts of all elements.
    Shared,
    /// Each element sees its own independent trace.
    PerAntenna,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub carrier_freq_hz: f64,
    pub walk_speed_mps: f64,
    pub sample_rate_hz: f64,
    /// Receive SNR in dB; `+inf` disables noise.
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub sigma_h_sq: f64,
    pub num_scatterers: usize,
    pub coupling: ChannelCoupling,
    /// Debug switch: force `h = 1` for every sample.
    #[serde(default)]
    pub identity_channel: bool,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            carrier_freq_hz: 5e9,
            walk_speed_mps: 1.0,
            sample_rate_hz: 1e6,
            snr_db: 20.0,
            sigma_h_sq: 1.0,
            num_scatterers: 64,
            coupling: ChannelCoupling::Shared,
            identity_channel: false,
        }
    }
}

// JSON has no infinity; the noiseless setting is written as null.
mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl ChannelParams {
    pub fn noiseless(mut self) -> Self {
        self.snr_db = f64::INFINITY;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("sample_rate_hz", self.sample_rate_hz),
            ("sigma_h_sq", self.sigma_h_sq),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if !(self.walk_speed_mps.is_finite() && self.walk_speed_mps >= 0.0) {
            return Err(Error::invalid(
                "walk_speed_mps",
                format!("must be finite and >= 0, got {}", self.walk_speed_mps),
            ));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::invalid("snr_db", "must be a number or +inf"));
        }
        if self.num_scatterers == 0 {
            return Err(Error::invalid("num_scatterers", "must be at least 1"));
        }
        Ok(())
    }

    pub fn doppler_hz(&self) -> f64 {
        doppler_shift(self)
    }

    /// Noise variance for a unit-power pilot scaled by the channel power.
    pub fn noise_variance(&self) -> f64 {
        noise_variance(self.snr_db, self.sigma_h_sq)
    }
}

/// Maximum Doppler shift `(v / c) * f`, Hz.
pub fn doppler_shift(params: &ChannelParams) -> f64 {
    params.walk_speed_mps / SPEED_OF_LIGHT * params.carrier_freq_hz
}

/// Clarke-model coherence time `sqrt(9 / (16 pi f_d^2))`, seconds.
pub fn coherence_time(doppler_hz: f64) -> Result<f64> {
    if !(doppler_hz.is_finite() && doppler_hz > 0.0) {
        return Err(Error::Domain(format!(
            "coherence time needs a positive Doppler shift, got {doppler_hz}"
        )));
    }
    Ok((9.0 / (16.0 * PI * doppler_hz * doppler_hz)).sqrt())
}

/// `sigma_w^2 = P / 10^(snr/10)`; zero for infinite SNR.
pub fn noise_variance(snr_db: f64, signal_power: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        signal_power / 10f64.powf(snr_db / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FadingTrace {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
    pub doppler_hz: f64,
}

impl FadingTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|h| h.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

// Phasors are advanced by complex rotation and re-anchored periodically so
// rounding drift stays at the 1e-13 level.
const REANCHOR: usize = 256;

/// One trace of `n` fading coefficients. Deterministic given `stream_seed`.
pub fn generate_fading(params: &ChannelParams, n: usize, stream_seed: u64) -> Result<FadingTrace> {
    if n == 0 {
        return Err(Error::invalid("n", "trace length must be positive"));
    }
    params.validate()?;
    let doppler_hz = doppler_shift(params);
    if params.identity_channel {
        return Ok(FadingTrace {
            samples: vec![Complex64::new(1.0, 0.0); n],
            sample_rate_hz: params.sample_rate_hz,
            doppler_hz,
        });
    }

    let m = params.num_scatterers;
    let mut rng = seed::stream(stream_seed);
    let mut omega = Vec::with_capacity(m);
    let mut chi = Vec::with_capacity(m);
    for _ in 0..m {
        let gamma: f64 = rng.random::<f64>() * TAU;
        omega.push(TAU * doppler_hz * gamma.cos() / params.sample_rate_hz);
        chi.push(rng.random::<f64>() * TAU);
    }
    let step: Vec<Complex64> = omega
        .iter()
        .map(|&w| Complex64::from_polar(1.0, w))
        .collect();
    let gain = (params.sigma_h_sq / m as f64).sqrt();

    let mut phasor = vec![Complex64::new(0.0, 0.0); m];
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        if i % REANCHOR == 0 {
            for k in 0..m {
                phasor[k] = Complex64::from_polar(1.0, omega[k] * i as f64 + chi[k]);
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, s) in phasor.iter_mut().zip(&step) {
            acc += *p;
            *p *= *s;
        }
        samples.push(acc * gain);
    }
    Ok(FadingTrace {
        samples,
        sample_rate_hz: params.sample_rate_hz,
        doppler_hz,
    })
}

/// Circular complex Gaussian noise with total variance `variance`.
pub fn complex_noise(len: usize, variance: f64, stream_seed: u64) -> Vec<Complex64> {
    let mut rng = seed::stream(stream_seed);
    let scale = (variance / 2.0).sqrt();
    (0..len)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re * scale, im * scale)
        })
        .collect()
}

/// Adds noise at `snr_db` relative to `signal_power`. With `snr_db = +inf`
/// the input is returned unchanged.
pub fn add_noise(
    signal: &[Complex64],
    snr_db: f64,
    signal_power: f64,
    stream_seed: u64,
) -> Result<Vec<Complex64>> {
    if signal.is_empty() {
        return Err(Error::invalid("signal", "must not be empty"));
    }
    if !(signal_power.is_finite() && signal_power > 0.0) {
        return Err(Error::invalid(
            "signal_power",
            format!("must be finite and > 0, got {signal_power}"),
        ));
    }
    if snr_db.is_nan() {
        return Err(Error::invalid("snr_db", "must not be NaN"));
    }
    let var = noise_variance(snr_db, signal_power);
    if var == 0.0 {
        return Ok(signal.to_vec());
    }
    let noise = complex_noise(signal.len(), var, stream_seed);
    Ok(signal.iter().zip(noise).map(|(s, w)| s + w).collect())
}
