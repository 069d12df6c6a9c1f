//! One authentication session.
//!
//! The four elements are switched on one after another, each sending the
//! unit-amplitude pilot `exp(j alpha_k)` for `n` samples. The receiver sees
//! `y = h * x + w` and stores the bursts side by side as an `n x 8` matrix
//! with columns `[I1 Q1 I2 Q2 I3 Q3 I4 Q4]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelCoupling, ChannelParams};
use crate::fingerprint::{CaaDevice, Direction, ELEMENTS_PER_DEVICE, THETA_MAX};
use crate::seed::{self, tag};
use crate::{Error, Result};

pub const NUM_COLUMNS: usize = 2 * ELEMENTS_PER_DEVICE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub device_id: u32,
    pub session_index: u32,
    pub direction: Direction,
    pub n_samples: usize,
    /// Row-major `n_samples x 8`.
    pub samples: Vec<f32>,
}

impl SessionRecord {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.samples[i * NUM_COLUMNS..(i + 1) * NUM_COLUMNS]
    }

    /// Received complex samples of element `k` (0-based).
    pub fn element(&self, k: usize) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.n_samples).map(move |i| {
            let r = self.row(i);
            Complex64::new(r[2 * k] as f64, r[2 * k + 1] as f64)
        })
    }
}

/// Uniform direction with `theta` in `[0, 75 deg]` and `phi` in `[-180, 180] deg`.
pub fn sample_direction(stream_seed: u64) -> Direction {
    let mut rng = seed::stream(stream_seed);
    let theta = rng.random::<f64>() * THETA_MAX;
    let phi = -PI + rng.random::<f64>() * 2.0 * PI;
    Direction { theta, phi }
}

/// Noiseless received bursts `h * exp(j alpha_k)`, one vector per element.
pub fn clean_bursts(
    device: &CaaDevice,
    direction: &Direction,
    channel: &ChannelParams,
    n: usize,
    stream_seed: u64,
) -> Result<[Vec<Complex64>; ELEMENTS_PER_DEVICE]> {
    if n == 0 {
        return Err(Error::invalid("n", "samples per element must be positive"));
    }
    let alphas = device.phases(direction)?;
    let traces: Vec<Vec<Complex64>> = match channel.coupling {
        ChannelCoupling::Shared => {
            let trace = channel::generate_fading(
                channel,
                n * ELEMENTS_PER_DEVICE,
                seed::derive(stream_seed, &[tag::FADING]),
            )?;
            trace.samples.chunks(n).map(<[Complex64]>::to_vec).collect()
        }
        ChannelCoupling::PerAntenna => (0..ELEMENTS_PER_DEVICE)
            .map(|k| {
                channel::generate_fading(
                    channel,
                    n,
                    seed::derive(stream_seed, &[tag::FADING, k as u64]),
                )
                .map(|t| t.samples)
            })
            .collect::<Result<_>>()?,
    };
    let mut out: [Vec<Complex64>; ELEMENTS_PER_DEVICE] = Default::default();
    for (k, h) in traces.into_iter().enumerate() {
        let pilot = Complex64::from_polar(1.0, alphas[k]);
        out[k] = h.into_iter().map(|h| h * pilot).collect();
    }
    Ok(out)
}

/// Simulates one session. Pure in all of its arguments.
pub fn generate_session(
    device: &CaaDevice,
    direction: &Direction,
    channel: &ChannelParams,
    n: usize,
    session_index: u32,
    stream_seed: u64,
) -> Result<SessionRecord> {
    channel.validate()?;
    let clean = clean_bursts(device, direction, channel, n, stream_seed)?;
    let noise_var = channel.noise_variance();
    let mut samples = vec![0f32; n * NUM_COLUMNS];
    for (k, burst) in clean.iter().enumerate() {
        let noise = (noise_var > 0.0).then(|| {
            channel::complex_noise(
                n,
                noise_var,
                seed::derive(stream_seed, &[tag::NOISE, k as u64]),
            )
        });
        for (i, y) in burst.iter().enumerate() {
            let y = match &noise {
                Some(w) => y + w[i],
                None => *y,
            };
            samples[i * NUM_COLUMNS + 2 * k] = y.re as f32;
            samples[i * NUM_COLUMNS + 2 * k + 1] = y.im as f32;
        }
    }
    Ok(SessionRecord {
        device_id: u32::try_from(device.device_id)
            .map_err(|_| Error::invalid("device_id", "must fit in 32 bits"))?,
        session_index,
        direction: *direction,
        n_samples: n,
        samples,
    })
}

/// Aggregate SNR of a batch of sessions, measured against their noiseless
/// counterparts: `sum |clean|^2 / sum |noisy - clean|^2`, in dB.
#[derive(Debug, Clone, Copy, Default)]
pub struct SnrMeter {
    signal: f64,
    noise: f64,
}

impl SnrMeter {
    pub fn push(&mut self, clean: &[Complex64], noisy: impl Iterator<Item = Complex64>) {
        for (c, y) in clean.iter().zip(noisy) {
            self.signal += c.norm_sqr();
            self.noise += (y - c).norm_sqr();
        }
    }

    pub fn merge(&self, other: &SnrMeter) -> SnrMeter {
        SnrMeter {
            signal: self.signal + other.signal,
            noise: self.noise + other.noise,
        }
    }

    pub fn signal_power_sum(&self) -> f64 {
        self.signal
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.signal / self.noise).log10()
    }
}
