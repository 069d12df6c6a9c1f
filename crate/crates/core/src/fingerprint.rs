//! Randomized patch antennas and their direction-dependent phase errors.
//!
//! A patch starts as a nominal `width x height` rectangle centred on the
//! coupling aperture. The whole rectangle is shifted by `(r, psi)` and each
//! corner is then perturbed by `(c_i, tau_i)`, turning it into an irregular
//! quadrilateral.
//!
//! The phase error an element imprints on the pilot is modelled as a smooth
//! random field over `(theta, phi)`: a constant offset plus a truncated 2-D
//! harmonic expansion. Feed-line randomization contributes only the constant
//! offset; shape randomization contributes the harmonics.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::seed::{self, tag};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Resonant frequency of the array elements, in Hz.
pub const ELEMENT_FREQ_HZ: f64 = 5.8e9;

/// Number of elements in one device.
pub const ELEMENTS_PER_DEVICE: usize = 4;

/// Upper bound of the elevation range, in radians (75 degrees).
pub const THETA_MAX: f64 = 75.0 * PI / 180.0;

/// Element pitch of a half-wavelength array at [`ELEMENT_FREQ_HZ`], in mm.
pub fn element_pitch_mm() -> f64 {
    SPEED_OF_LIGHT / (2.0 * ELEMENT_FREQ_HZ) * 1e3
}

/// Wraps an angle into `[0, 2pi)`.
#[inline]
pub fn wrap_phase(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Smallest absolute difference between two angles, in `[0, pi]`.
#[inline]
pub fn wrapped_distance(a: f64, b: f64) -> f64 {
    let d = wrap_phase(a - b);
    d.min(TAU - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FingerprintMode {
    /// Shape randomization: direction-dependent phase error.
    Geometry,
    /// Feed-line randomization only: one constant phase error per element.
    Feedline,
    /// Small constant error emulating natural IC fingerprints.
    Traditional,
}

impl FingerprintMode {
    fn tag(self) -> u64 {
        match self {
            FingerprintMode::Geometry => 1,
            FingerprintMode::Feedline => 2,
            FingerprintMode::Traditional => 3,
        }
    }
}

impl fmt::Display for FingerprintMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FingerprintMode::Geometry => "geometry",
            FingerprintMode::Feedline => "feedline",
            FingerprintMode::Traditional => "traditional",
        })
    }
}

impl FromStr for FingerprintMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "caa" | "geometry" => Ok(FingerprintMode::Geometry),
            "feedline" => Ok(FingerprintMode::Feedline),
            "traditional" => Ok(FingerprintMode::Traditional),
            other => Err(Error::invalid(
                "mode",
                format!("`{other}` is not one of caa, geometry, feedline, traditional"),
            )),
        }
    }
}

/// Shape of the synthesized phase-error field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseFieldParams {
    /// Highest harmonic order in theta (`p = 1..=max_theta_order`).
    pub max_theta_order: u32,
    /// Highest absolute harmonic order in phi (`|q| <= max_phi_order`).
    pub max_phi_order: u32,
    /// Amplitude budget `A`: order `(p, q)` draws its amplitude from
    /// `U[0, A / (p + |q|)]`, in radians.
    pub amplitude_scale: f64,
    /// Standard deviation of the traditional-mode constant error, radians.
    pub traditional_sigma: f64,
}

impl Default for PhaseFieldParams {
    fn default() -> Self {
        Self {
            max_theta_order: 3,
            max_phi_order: 3,
            amplitude_scale: 0.22,
            traditional_sigma: 5.0_f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizationParams {
    /// Maximum centre shift `R`, mm.
    pub r_max_mm: f64,
    /// Maximum corner perturbation `C`, mm.
    pub c_max_mm: f64,
    pub nominal_width_mm: f64,
    pub nominal_height_mm: f64,
    pub master_seed: u64,
    #[serde(default)]
    pub phase: PhaseFieldParams,
}

impl Default for RandomizationParams {
    fn default() -> Self {
        Self {
            r_max_mm: 4.0,
            c_max_mm: 0.5,
            nominal_width_mm: 14.4,
            nominal_height_mm: 12.0,
            master_seed: 0,
            phase: PhaseFieldParams::default(),
        }
    }
}

impl RandomizationParams {
    pub fn with_seed(master_seed: u64) -> Self {
        Self {
            master_seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn finite_nonneg(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(
                    name,
                    format!("must be finite and >= 0, got {v}"),
                ))
            }
        }
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ))
            }
        }
        finite_nonneg("r_max_mm", self.r_max_mm)?;
        finite_nonneg("c_max_mm", self.c_max_mm)?;
        positive("nominal_width_mm", self.nominal_width_mm)?;
        positive("nominal_height_mm", self.nominal_height_mm)?;
        positive("amplitude_scale", self.phase.amplitude_scale)?;
        finite_nonneg("traditional_sigma", self.phase.traditional_sigma)?;
        if self.phase.max_theta_order == 0 {
            return Err(Error::invalid("max_theta_order", "must be at least 1"));
        }
        Ok(())
    }

    /// Corners of the unperturbed rectangle centred at the origin, in
    /// counter-clockwise order starting bottom-left.
    pub fn nominal_corners(&self) -> [(f64, f64); 4] {
        let hw = self.nominal_width_mm / 2.0;
        let hh = self.nominal_height_mm / 2.0;
        [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchGeometry {
    pub corners: [(f64, f64); 4],
    /// `(r, psi)`: shift of the rectangle centre, mm and radians.
    pub center_shift: (f64, f64),
    /// `(c_i, tau_i)` per corner, mm and radians.
    pub corner_perturbations: [(f64, f64); 4],
}

impl PatchGeometry {
    /// Rebuilds the corners from the nominal rectangle and the stored draws.
    pub fn reconstruct(&self, params: &RandomizationParams) -> [(f64, f64); 4] {
        corners_from(params, self.center_shift, &self.corner_perturbations)
    }
}

fn corners_from(
    params: &RandomizationParams,
    (r, psi): (f64, f64),
    perturb: &[(f64, f64); 4],
) -> [(f64, f64); 4] {
    let nominal = params.nominal_corners();
    std::array::from_fn(|i| {
        let (x, y) = nominal[i];
        let (c, tau) = perturb[i];
        (
            x + r * psi.cos() + c * tau.cos(),
            y + r * psi.sin() + c * tau.sin(),
        )
    })
}

/// Draws the randomized patch for `antenna_id`.
pub fn randomize_patch(params: &RandomizationParams, antenna_id: u64) -> PatchGeometry {
    let mut rng = seed::derived_stream(params.master_seed, &[tag::PATCH_GEOMETRY, antenna_id]);
    let r = rng.random::<f64>() * params.r_max_mm;
    let psi = rng.random::<f64>() * TAU;
    let corner_perturbations: [(f64, f64); 4] = std::array::from_fn(|_| {
        let c = rng.random::<f64>() * params.c_max_mm;
        let tau = rng.random::<f64>() * TAU;
        (c, tau)
    });
    let center_shift = (r, psi);
    PatchGeometry {
        corners: corners_from(params, center_shift, &corner_perturbations),
        center_shift,
        corner_perturbations,
    }
}

/// Transmission direction: elevation `theta` and azimuth `phi`, radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        let d = Self { theta, phi };
        d.check()?;
        Ok(d)
    }

    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        Self::new(theta_deg.to_radians(), phi_deg.to_radians())
    }

    pub fn check(&self) -> Result<()> {
        if !(0.0..=THETA_MAX).contains(&self.theta) {
            return Err(Error::OutOfRange {
                what: "theta",
                value: self.theta,
                min: 0.0,
                max: THETA_MAX,
            });
        }
        if !(-PI..=PI).contains(&self.phi) {
            return Err(Error::OutOfRange {
                what: "phi",
                value: self.phi,
                min: -PI,
                max: PI,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    /// Order in normalized theta, `1..=P`.
    pub p: u32,
    /// Order in phi, `-Q..=Q`.
    pub q: i32,
    pub amplitude: f64,
    pub phase_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseField {
    pub mode: FingerprintMode,
    /// Constant term, radians in `[0, 2pi)`.
    pub beta: f64,
    pub harmonics: Vec<Harmonic>,
    pub max_theta_order: u32,
    pub max_phi_order: u32,
}

impl PhaseField {
    /// A direction-independent field.
    pub fn constant(mode: FingerprintMode, beta: f64) -> Self {
        Self {
            mode,
            beta: wrap_phase(beta),
            harmonics: Vec::new(),
            max_theta_order: 0,
            max_phi_order: 0,
        }
    }

    /// Phase error towards `dir`, wrapped into `[0, 2pi)`.
    pub fn eval(&self, dir: &Direction) -> Result<f64> {
        dir.check()?;
        Ok(wrap_phase(self.eval_unwrapped(dir)))
    }

    /// The continuous field value before wrapping. Does not range-check.
    pub fn eval_unwrapped(&self, dir: &Direction) -> f64 {
        // one full harmonic period across the allowed elevation range
        let theta_norm = dir.theta * (TAU / THETA_MAX);
        self.beta
            + self
                .harmonics
                .iter()
                .map(|h| {
                    h.amplitude
                        * (h.p as f64 * theta_norm + h.q as f64 * dir.phi + h.phase_offset).cos()
                })
                .sum::<f64>()
    }
}

impl PhaseField {
    /// Wrapped field values on a regular `theta_steps x phi_steps` grid
    /// spanning `[0, 75 deg] x [-180, 180] deg`, row-major in theta.
    pub fn grid(&self, theta_steps: usize, phi_steps: usize) -> Vec<Vec<f64>> {
        let step = |i: usize, n: usize, lo: f64, hi: f64| {
            if n <= 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        (0..theta_steps)
            .map(|i| {
                let theta = step(i, theta_steps, 0.0, THETA_MAX);
                (0..phi_steps)
                    .map(|j| {
                        let phi = step(j, phi_steps, -PI, PI);
                        wrap_phase(self.eval_unwrapped(&Direction { theta, phi }))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Synthesizes the phase-error field of `antenna_id` in `mode`.
pub fn synthesize_phase_field(
    params: &RandomizationParams,
    antenna_id: u64,
    mode: FingerprintMode,
) -> PhaseField {
    let mut rng = seed::derived_stream(
        params.master_seed,
        &[tag::PHASE_FIELD, antenna_id, mode.tag()],
    );
    let pp = &params.phase;
    match mode {
        FingerprintMode::Feedline => PhaseField::constant(mode, rng.random::<f64>() * TAU),
        FingerprintMode::Traditional => {
            let beta = if pp.traditional_sigma > 0.0 {
                Normal::new(0.0, pp.traditional_sigma)
                    .expect("sigma validated")
                    .sample(&mut rng)
            } else {
                0.0
            };
            PhaseField::constant(mode, beta)
        }
        FingerprintMode::Geometry => {
            let beta = wrap_phase(rng.random::<f64>() * TAU);
            let q_max = pp.max_phi_order as i32;
            let mut harmonics =
                Vec::with_capacity((pp.max_theta_order * (2 * pp.max_phi_order + 1)) as usize);
            for p in 1..=pp.max_theta_order {
                for q in -q_max..=q_max {
                    let bound = pp.amplitude_scale / (p as f64 + q.unsigned_abs() as f64);
                    let amplitude = rng.random::<f64>() * bound;
                    let phase_offset = rng.random::<f64>() * TAU;
                    harmonics.push(Harmonic {
                        p,
                        q,
                        amplitude,
                        phase_offset,
                    });
                }
            }
            PhaseField {
                mode,
                beta,
                harmonics,
                max_theta_order: pp.max_theta_order,
                max_phi_order: pp.max_phi_order,
            }
        }
    }
}

/// Phase error of `field` towards `dir`.
pub fn eval_phase(field: &PhaseField, dir: &Direction) -> Result<f64> {
    field.eval(dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaFingerprint {
    pub antenna_id: u64,
    pub geometry: PatchGeometry,
    pub phase_field: PhaseField,
}

impl AntennaFingerprint {
    pub fn generate(params: &RandomizationParams, antenna_id: u64, mode: FingerprintMode) -> Self {
        Self {
            antenna_id,
            geometry: randomize_patch(params, antenna_id),
            phase_field: synthesize_phase_field(params, antenna_id, mode),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaaDevice {
    pub device_id: u64,
    pub elements: [AntennaFingerprint; ELEMENTS_PER_DEVICE],
    /// Element centres in mm, a 1 x 4 line at half-wavelength pitch.
    pub element_positions: [(f64, f64); ELEMENTS_PER_DEVICE],
}

impl CaaDevice {
    /// Phase errors of the four elements towards `dir`.
    pub fn phases(&self, dir: &Direction) -> Result<[f64; ELEMENTS_PER_DEVICE]> {
        dir.check()?;
        Ok(std::array::from_fn(|k| {
            wrap_phase(self.elements[k].phase_field.eval_unwrapped(dir))
        }))
    }
}

pub fn build_device(
    params: &RandomizationParams,
    device_id: u64,
    mode: FingerprintMode,
) -> CaaDevice {
    let pitch = element_pitch_mm();
    let base = device_id * ELEMENTS_PER_DEVICE as u64;
    CaaDevice {
        device_id,
        elements: std::array::from_fn(|k| {
            AntennaFingerprint::generate(params, base + k as u64, mode)
        }),
        element_positions: std::array::from_fn(|k| (k as f64 * pitch, 0.0)),
    }
}
