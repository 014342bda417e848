//! OFDM reference symbol: carrier layout, Newman phases and the
//! time/frequency transforms of a single symbol.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{crest_factor, FftPair};
use crate::error::{Error, Result};

/// Carrier grid and timing of the illuminating OFDM signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmConfig {
    pub center_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub n_carriers: usize,
    pub n_active: usize,
    pub symbol_duration_s: f64,
    /// Every `pilot_stride`-th active carrier is a pilot; 0 disables pilots.
    pub pilot_stride: usize,
    pub subsample_factor: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            center_freq_hz: 3.7e9,
            bandwidth_hz: 200e6,
            n_carriers: 1600,
            n_active: 1280,
            symbol_duration_s: 8e-6,
            pilot_stride: 10,
            subsample_factor: 8,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.center_freq_hz) {
            return Err(Error::config("center_freq_hz", "must be positive"));
        }
        if !pos(self.bandwidth_hz) {
            return Err(Error::config("bandwidth_hz", "must be positive"));
        }
        if self.bandwidth_hz / 2.0 >= self.center_freq_hz {
            return Err(Error::config("bandwidth_hz", "band extends below 0 Hz"));
        }
        if self.n_carriers < 8 {
            return Err(Error::config("n_carriers", "need at least 8 carriers"));
        }
        if self.n_active == 0 || self.n_active > self.n_carriers {
            return Err(Error::config(
                "n_active",
                format!("must lie in 1..={}", self.n_carriers),
            ));
        }
        if !pos(self.symbol_duration_s) {
            return Err(Error::config("symbol_duration_s", "must be positive"));
        }
        let product = self.carrier_spacing_hz() * self.symbol_duration_s;
        if (product - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "symbol_duration_s",
                format!(
                    "carrier spacing {} Hz times symbol duration {} s is {product}, expected 1",
                    self.carrier_spacing_hz(),
                    self.symbol_duration_s
                ),
            ));
        }
        if self.subsample_factor == 0 {
            return Err(Error::config("subsample_factor", "must be at least 1"));
        }
        if self.data_carrier_count() == 0 {
            return Err(Error::config("pilot_stride", "leaves no data carriers"));
        }
        Ok(())
    }

    pub fn carrier_spacing_hz(&self) -> f64 {
        self.bandwidth_hz / self.n_carriers as f64
    }

    pub fn symbol_rate_hz(&self) -> f64 {
        1.0 / self.symbol_duration_s
    }

    /// Slow-time rate after subsampling.
    pub fn slow_time_rate_hz(&self) -> f64 {
        self.symbol_rate_hz() / self.subsample_factor as f64
    }

    pub fn wavelength_m(&self) -> f64 {
        crate::geometry::SPEED_OF_LIGHT / self.center_freq_hz
    }

    /// Index of the first active carrier; the extra guard of an odd split
    /// goes to the upper edge.
    pub fn first_active(&self) -> usize {
        (self.n_carriers - self.n_active) / 2
    }

    pub fn active_range(&self) -> std::ops::Range<usize> {
        let lo = self.first_active();
        lo..lo + self.n_active
    }

    /// RF frequency of carrier `k`.
    pub fn carrier_freq_hz(&self, k: usize) -> f64 {
        self.center_freq_hz + (k as f64 - (self.n_carriers / 2) as f64) * self.carrier_spacing_hz()
    }

    pub fn carrier_freqs_hz(&self) -> Vec<f64> {
        (0..self.n_carriers).map(|k| self.carrier_freq_hz(k)).collect()
    }

    /// Whether active carrier number `j` (0-based within the active block)
    /// is a pilot.
    pub fn is_pilot_slot(&self, j: usize) -> bool {
        self.pilot_stride != 0 && j.is_multiple_of(self.pilot_stride)
    }

    pub fn pilot_count(&self) -> usize {
        match self.pilot_stride {
            0 => 0,
            s => self.n_active.div_ceil(s),
        }
    }

    pub fn data_carrier_count(&self) -> usize {
        self.n_active - self.pilot_count()
    }

    /// Bandwidth spanned by the active block.
    pub fn active_bandwidth_hz(&self) -> f64 {
        self.n_active as f64 * self.carrier_spacing_hz()
    }
}

/// Newman phases `pi (k-1)^2 / n`, k = 1..=n.
pub fn newman_phases(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| PI * (k as f64) * (k as f64) / n as f64)
        .collect()
}

/// Frequency-domain reference symbol `X(f)` with its carrier masks.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSymbol {
    config: OfdmConfig,
    x: Vec<Complex64>,
    active: Vec<bool>,
    pilot: Vec<bool>,
}

impl ReferenceSymbol {
    pub fn config(&self) -> &OfdmConfig {
        &self.config
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.x
    }

    pub fn active_mask(&self) -> &[bool] {
        &self.active
    }

    pub fn pilot_mask(&self) -> &[bool] {
        &self.pilot
    }

    pub fn n_carriers(&self) -> usize {
        self.x.len()
    }

    pub fn is_data(&self, k: usize) -> bool {
        self.active[k] && !self.pilot[k]
    }

    /// Carrier indices of the active non-pilot carriers, ascending.
    pub fn data_carriers(&self) -> Vec<usize> {
        (0..self.x.len()).filter(|&k| self.is_data(k)).collect()
    }

    pub fn pilot_carriers(&self) -> Vec<usize> {
        (0..self.x.len()).filter(|&k| self.pilot[k]).collect()
    }
}

/// Unit-magnitude Newman-phased carriers over the active block (pilots
/// included), zeros on the guard bands.
pub fn build_reference(config: &OfdmConfig) -> Result<ReferenceSymbol> {
    config.validate()?;
    let n = config.n_carriers;
    let phases = newman_phases(config.n_active);
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut active = vec![false; n];
    let mut pilot = vec![false; n];
    for (j, k) in config.active_range().enumerate() {
        x[k] = Complex64::from_polar(1.0, phases[j]);
        active[k] = true;
        pilot[k] = config.is_pilot_slot(j);
    }
    Ok(ReferenceSymbol {
        config: config.clone(),
        x,
        active,
        pilot,
    })
}

/// Baseband samples of one symbol, `n_carriers` samples at the bandwidth
/// rate. Carrier `k` sits at baseband frequency `(k - n/2) df`.
pub fn time_domain_symbol(reference: &ReferenceSymbol) -> Vec<Complex64> {
    spectrum_to_time(reference.spectrum())
}

pub fn spectrum_to_time(spectrum: &[Complex64]) -> Vec<Complex64> {
    let n = spectrum.len();
    let half = n / 2;
    // carrier order -> FFT bin order
    let mut buf: Vec<Complex64> = (0..n).map(|i| spectrum[(i + half) % n]).collect();
    FftPair::new(n).inverse(&mut buf);
    buf
}

/// Inverse of [`spectrum_to_time`].
pub fn time_to_spectrum(samples: &[Complex64]) -> Vec<Complex64> {
    let n = samples.len();
    let half = n / 2;
    let mut buf = samples.to_vec();
    FftPair::new(n).forward(&mut buf);
    (0..n).map(|k| buf[(k + n - half) % n]).collect()
}

pub fn symbol_crest_factor(reference: &ReferenceSymbol) -> f64 {
    crest_factor(&time_domain_symbol(reference))
}
