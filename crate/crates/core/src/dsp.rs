//! FFT plumbing, analysis windows and robust statistics shared by both
//! processing chains.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

/// Forward/inverse transform pair of a fixed length.
///
/// The forward transform is unnormalized; the inverse carries the `1/n`
/// factor so `inverse(forward(x)) == x`.
#[derive(Clone)]
pub struct FftPair {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.forward.process(buf);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inverse.process(buf);
        let scale = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }
}

impl fmt::Debug for FftPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FftPair").field("len", &self.len).finish()
    }
}

/// Analysis window applied before a discrete transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    /// Periodic (DFT-even) window coefficients.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        }
    }

    /// Monotone upper envelope of the window's normalized transform
    /// magnitude, sampled on an `n_fft`-point grid for a window of length
    /// `n`. Entry `m` bounds the response of a line at an offset of `m` or
    /// more grid bins.
    pub fn leakage_envelope(self, n: usize, n_fft: usize) -> Vec<f64> {
        let mut buf: Vec<Complex64> = self
            .coefficients(n)
            .into_iter()
            .map(|w| Complex64::new(w, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(n_fft)
            .collect();
        FftPair::new(n_fft).forward(&mut buf);
        let peak = buf[0].norm();
        let half = n_fft / 2 + 1;
        let mut env: Vec<f64> = buf[..half].iter().map(|v| v.norm() / peak).collect();
        for i in (0..half.saturating_sub(1)).rev() {
            env[i] = env[i].max(env[i + 1]);
        }
        env
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Linearly interpolated percentile (`p` in 0..=100) of a sample set.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (p.clamp(0.0, 100.0) / 100.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

pub fn median(values: &[f64]) -> f64 {
    percentile(values, 50.0)
}

pub fn power_db(power: f64) -> f64 {
    10.0 * power.log10()
}

pub fn amplitude_db(amplitude: f64) -> f64 {
    20.0 * amplitude.log10()
}

/// Peak-to-RMS ratio of a complex sequence.
pub fn crest_factor(samples: &[Complex64]) -> f64 {
    let peak = samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let rms = (samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / samples.len() as f64).sqrt();
    peak / rms
}
