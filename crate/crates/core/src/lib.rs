//! Simulation and authentication toolkit for chaotic antenna arrays (CAAs).
//!
//! The pipeline mirrors a physical-layer authentication experiment:
//!
//! 1. [`fingerprint`] draws randomized patch geometries and synthesizes a
//!    per-antenna phase-error field over transmission directions.
//! 2. [`channel`] produces time-correlated Rayleigh fading (Clarke model,
//!    sum of sinusoids) and complex AWGN.
//! 3. [`session`] switches the four elements of a device on in turn and
//!    records the received pilot as an `N x 8` I/Q matrix.
//! 4. [`dataset`] builds whole corpora, splits them and serializes them to
//!    the `.caad` binary layout plus a JSON manifest.
//! 5. [`classifier`] is a from-scratch CNN-3 authenticator with training,
//!    evaluation, checkpointing and a finite-difference gradient check.
//!
//! [`stats`] and [`validation`] hold the statistical tests used to check the
//! simulators against their analytic models.

pub mod channel;
pub mod classifier;
pub mod dataset;
pub mod error;
pub mod fingerprint;
pub mod par;
pub mod seed;
pub mod session;
pub mod stats;
pub mod validation;

pub use error::{Error, Result};

/// Speed of light used throughout the simulator, in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.9979e8;
