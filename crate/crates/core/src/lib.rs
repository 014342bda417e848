//! Simulation and processing toolkit for drone signatures in integrated
//! communication and sensing (ICAS) settings.
//!
//! Two chains are provided:
//!
//! * **Micro-Doppler**: an OFDM reference symbol illuminates a scene with
//!   rotating propellers ([`waveform`], [`simulate`]); the received spectra
//!   are turned into channel estimates, a single range bin is tracked over
//!   slow time and analysed for its Doppler line structure ([`mdproc`]).
//! * **Static reflectivity**: stepped-frequency S21 sweeps over a grid of
//!   bistatic angles ([`simulate`]) go through calibration, background
//!   subtraction, time-domain gating and normalization ([`reflproc`]).
//!
//! [`geometry`] holds the closed-form bistatic Doppler relations used as
//! predictions throughout, and [`verify`] bundles the acceptance checks.

pub mod dsp;
pub mod error;
pub mod geometry;
pub mod mdproc;
pub mod pipeline;
pub mod reflproc;
pub mod scene;
pub mod simulate;
pub mod verify;
pub mod waveform;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Crate version, stamped into every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
