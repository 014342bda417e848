//! Forward model: per-symbol OFDM spectra of a dynamic scene and
//! stepped-frequency S21 sweeps over bistatic angle grids.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BistaticGeometry, Vec3, SPEED_OF_LIGHT};
use crate::scene::{PointScatterer, Polarization, Scene};
use crate::waveform::{OfdmConfig, ReferenceSymbol};

const REANCHOR_EVERY: usize = 64;

/// Circularly-symmetric complex white noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Standard deviation of the complex sample (total over I and Q).
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec { sigma: 0.0, seed: 0 };

    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::arg("sigma", "must be non-negative"));
        }
        Ok(Self { sigma, seed })
    }

    pub fn is_silent(&self) -> bool {
        self.sigma == 0.0
    }

    /// Adds noise drawn from the stream identified by `stream`, so a
    /// sample's noise depends only on the seed and its own index.
    pub fn add_to(&self, buf: &mut [Complex64], stream: u64) {
        if self.is_silent() {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        let s = self.sigma / 2f64.sqrt();
        for v in buf.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(re * s, im * s);
        }
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::NONE
    }
}

/// Two-way delay and amplitude of one scatterer as seen by the antennas.
fn path(geom: &BistaticGeometry, s: &PointScatterer, pol: Polarization) -> Result<(f64, Complex64)> {
    let d_tx = geom.tx_pos().distance(s.position);
    let d_rx = geom.rx_pos().distance(s.position);
    if d_tx == 0.0 || d_rx == 0.0 {
        return Err(Error::DegenerateGeometry("scatterer coincides with an antenna"));
    }
    Ok(((d_tx + d_rx) / SPEED_OF_LIGHT, s.coeff.get(pol) / (d_tx * d_rx)))
}

pub(crate) fn uniform_step(freqs: &[f64]) -> Option<f64> {
    if freqs.len() < 2 {
        return None;
    }
    let step = (freqs[freqs.len() - 1] - freqs[0]) / (freqs.len() - 1) as f64;
    let tol = 1e-9 * step.abs().max(1.0);
    freqs
        .iter()
        .enumerate()
        .all(|(i, &f)| (f - (freqs[0] + i as f64 * step)).abs() <= tol)
        .then_some(step)
}

/// Adds the response of `scatterers` onto `out`, evaluated at `freqs`.
pub fn accumulate_response(
    scatterers: &[PointScatterer],
    geom: &BistaticGeometry,
    freqs: &[f64],
    pol: Polarization,
    out: &mut [Complex64],
) -> Result<()> {
    if out.len() != freqs.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} output slots for {} frequencies",
            out.len(),
            freqs.len()
        )));
    }
    let step = uniform_step(freqs);
    for s in scatterers {
        let (tau, amp) = path(geom, s, pol)?;
        if amp == Complex64::new(0.0, 0.0) {
            continue;
        }
        match step {
            Some(df) => {
                // geometric progression, re-anchored to bound round-off
                let rot = Complex64::from_polar(1.0, -2.0 * PI * df * tau);
                let rot4 = rot * rot * rot * rot;
                for (block, fb) in out.chunks_mut(REANCHOR_EVERY).zip(freqs.chunks(REANCHOR_EVERY)) {
                    let c0 = amp * Complex64::from_polar(1.0, -2.0 * PI * (fb[0] * tau).fract());
                    // four interleaved progressions keep the multiply chains short
                    let mut cur = [c0, c0 * rot, c0 * rot * rot, c0 * rot * rot * rot];
                    let mut quads = block.chunks_exact_mut(4);
                    for q in &mut quads {
                        for (o, c) in q.iter_mut().zip(cur.iter_mut()) {
                            *o += *c;
                            *c *= rot4;
                        }
                    }
                    for (o, c) in quads.into_remainder().iter_mut().zip(cur) {
                        *o += c;
                    }
                }
            }
            None => {
                for (o, &f) in out.iter_mut().zip(freqs) {
                    *o += amp * Complex64::from_polar(1.0, -2.0 * PI * (f * tau).fract());
                }
            }
        }
    }
    Ok(())
}

/// True channel `H(f)` of the full scene (target and background) at time
/// `t`, per leg spherical spreading `1/d` and bistatic path phase.
pub fn channel_response(
    scene: &Scene,
    geom: &BistaticGeometry,
    freqs: &[f64],
    t: f64,
    pol: Polarization,
) -> Result<Vec<Complex64>> {
    let mut out = vec![Complex64::new(0.0, 0.0); freqs.len()];
    accumulate_response(&scene.all_scatterers_at(t), geom, freqs, pol, &mut out)?;
    Ok(out)
}

/// Rejects scenes that move more than a tenth of a wavelength within one
/// symbol.
pub fn check_stop_and_go(scene: &Scene, config: &OfdmConfig) -> Result<()> {
    let lambda_min = SPEED_OF_LIGHT / (config.center_freq_hz + config.bandwidth_hz / 2.0);
    let disp = scene.max_speed() * config.symbol_duration_s;
    if disp >= lambda_min / 10.0 {
        return Err(Error::StopAndGo(format!(
            "displacement {disp:.3e} m per symbol exceeds lambda/10 = {:.3e} m",
            lambda_min / 10.0
        )));
    }
    Ok(())
}

/// Received spectra `Y(f, m)` over a run of symbols, symbol-major.
///
/// Only every `stride`-th transmitted symbol is stored; `first_symbol`
/// is the absolute index of row 0.
#[derive(Debug, Clone)]
pub struct SlowTimeCube {
    pub config: OfdmConfig,
    pub geometry: BistaticGeometry,
    pub n_symbols: usize,
    pub first_symbol: u64,
    pub stride: usize,
    pub data: Vec<Complex64>,
}

impl SlowTimeCube {
    pub fn n_carriers(&self) -> usize {
        self.config.n_carriers
    }

    pub fn symbol(&self, m: usize) -> &[Complex64] {
        let n = self.n_carriers();
        &self.data[m * n..(m + 1) * n]
    }

    /// Rate of the stored rows.
    pub fn row_rate_hz(&self) -> f64 {
        self.config.symbol_rate_hz() / self.stride as f64
    }

    /// Absolute time of stored row `m`.
    pub fn row_time_s(&self, m: usize) -> f64 {
        (self.first_symbol + (m * self.stride) as u64) as f64 * self.config.symbol_duration_s
    }
}

/// `Y(f, t)` for a single symbol at absolute index `symbol`.
pub fn simulate_symbol(
    scene: &Scene,
    geom: &BistaticGeometry,
    reference: &ReferenceSymbol,
    active_freqs: &[f64],
    symbol: u64,
    noise: &NoiseSpec,
) -> Result<Vec<Complex64>> {
    let config = reference.config();
    let t = symbol as f64 * config.symbol_duration_s;
    let range = config.active_range();
    let mut h = vec![Complex64::new(0.0, 0.0); active_freqs.len()];
    accumulate_response(&scene.all_scatterers_at(t), geom, active_freqs, Polarization::HH, &mut h)?;
    let mut y = vec![Complex64::new(0.0, 0.0); config.n_carriers];
    let x = reference.spectrum();
    for (k, hv) in range.zip(h) {
        y[k] = hv * x[k];
    }
    noise.add_to(&mut y, symbol);
    Ok(y)
}

/// Simulates symbols `first, first + stride, ...` (`n_rows` of them).
/// The result equals the corresponding rows of an unstrided run.
pub fn simulate_slow_time_strided(
    scene: &Scene,
    geom: &BistaticGeometry,
    reference: &ReferenceSymbol,
    n_rows: usize,
    first_symbol: u64,
    stride: usize,
    noise: &NoiseSpec,
) -> Result<SlowTimeCube> {
    let config = reference.config();
    if n_rows == 0 {
        return Err(Error::arg("n_symbols", "need at least one symbol"));
    }
    if stride == 0 {
        return Err(Error::arg("stride", "must be at least 1"));
    }
    scene.validate()?;
    check_stop_and_go(scene, config)?;
    let freqs: Vec<f64> = config.active_range().map(|k| config.carrier_freq_hz(k)).collect();
    let rows: Vec<Vec<Complex64>> = (0..n_rows)
        .into_par_iter()
        .map(|m| {
            let symbol = first_symbol + (m * stride) as u64;
            simulate_symbol(scene, geom, reference, &freqs, symbol, noise)
        })
        .collect::<Result<_>>()?;
    Ok(SlowTimeCube {
        config: config.clone(),
        geometry: *geom,
        n_symbols: n_rows,
        first_symbol,
        stride,
        data: rows.concat(),
    })
}

/// `Y(f, m) = H(f, m T) X(f) + noise` for `n_symbols` consecutive symbols
/// under the stop-and-go approximation.
pub fn simulate_slow_time(
    scene: &Scene,
    geom: &BistaticGeometry,
    reference: &ReferenceSymbol,
    n_symbols: usize,
    noise: &NoiseSpec,
) -> Result<SlowTimeCube> {
    simulate_slow_time_strided(scene, geom, reference, n_symbols, 0, 1, noise)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepLabel {
    #[serde(rename = "DUT_BG")]
    DutBg,
    #[serde(rename = "BG")]
    Bg,
}

impl SweepLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepLabel::DutBg => "DUT_BG",
            SweepLabel::Bg => "BG",
        }
    }
}

/// S21 over (bistatic angle, polarization, frequency), in that storage
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub label: SweepLabel,
    pub freqs_hz: Vec<f64>,
    pub angles_deg: Vec<f64>,
    pub data: Vec<Complex64>,
}

impl SweepRecord {
    pub fn zeros(label: SweepLabel, freqs_hz: Vec<f64>, angles_deg: Vec<f64>) -> Self {
        let n = freqs_hz.len() * angles_deg.len() * Polarization::ALL.len();
        Self {
            label,
            freqs_hz,
            angles_deg,
            data: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn n_freqs(&self) -> usize {
        self.freqs_hz.len()
    }

    fn offset(&self, angle: usize, pol: Polarization) -> usize {
        (angle * Polarization::ALL.len() + pol.index()) * self.n_freqs()
    }

    pub fn trace(&self, angle: usize, pol: Polarization) -> &[Complex64] {
        let o = self.offset(angle, pol);
        &self.data[o..o + self.n_freqs()]
    }

    pub fn trace_mut(&mut self, angle: usize, pol: Polarization) -> &mut [Complex64] {
        let o = self.offset(angle, pol);
        let n = self.n_freqs();
        &mut self.data[o..o + n]
    }

    /// Traces in storage order, each of length `n_freqs`.
    pub fn traces_mut(&mut self) -> std::slice::ChunksExactMut<'_, Complex64> {
        let n = self.n_freqs();
        self.data.chunks_exact_mut(n)
    }

    /// Copy restricted to the frequency indices `range`.
    pub fn frequency_slice(&self, range: std::ops::Range<usize>) -> SweepRecord {
        let nf = self.n_freqs();
        SweepRecord {
            label: self.label,
            freqs_hz: self.freqs_hz[range.clone()].to_vec(),
            angles_deg: self.angles_deg.clone(),
            data: self
                .data
                .chunks_exact(nf)
                .flat_map(|t| t[range.clone()].iter().copied())
                .collect(),
        }
    }

    pub fn same_grid(&self, other: &SweepRecord) -> bool {
        self.freqs_hz == other.freqs_hz && self.angles_deg == other.angles_deg
    }

    pub fn check_consistent(&self) -> Result<()> {
        if self.freqs_hz.is_empty() || self.angles_deg.is_empty() {
            return Err(Error::ShapeMismatch("empty sweep grid".into()));
        }
        let want = self.freqs_hz.len() * self.angles_deg.len() * Polarization::ALL.len();
        if self.data.len() != want {
            return Err(Error::ShapeMismatch(format!(
                "{} samples for a {}x{}x4 grid",
                self.data.len(),
                self.angles_deg.len(),
                self.freqs_hz.len()
            )));
        }
        Ok(())
    }
}

/// Uniform stepped-frequency grid of `n` points from `start` to `stop`.
pub fn linear_grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// 2-18 GHz in 1601 steps.
pub fn default_vna_freqs() -> Vec<f64> {
    linear_grid(2e9, 18e9, 1601)
}

/// 10 to 180 degrees in 5 degree steps.
pub fn default_vna_angles() -> Vec<f64> {
    (0..35).map(|i| 10.0 + 5.0 * i as f64).collect()
}

/// Smooth ripple plus a 5 ns delay, standing in for antennas, cabling and
/// the attenuator.
pub fn default_system_response(freqs: &[f64]) -> Vec<Complex64> {
    let (lo, hi) = match (freqs.first(), freqs.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        _ => (0.0, 1.0),
    };
    freqs
        .iter()
        .map(|&f| {
            let u = 2.0 * (f - lo) / (hi - lo) - 1.0;
            let mag = 0.1 * (1.0 + 0.3 * u - 0.2 * u * u);
            Complex64::from_polar(mag, -2.0 * PI * (f * 5e-9).fract())
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct VnaSweep {
    pub dut_bg: SweepRecord,
    pub bg: SweepRecord,
}

/// Both sweep records over `geometries` (one per entry of `angles_deg`).
/// BG sees the background scatterers only; DUT_BG adds the target. Noise
/// streams are distinct per record, angle and polarization.
pub fn simulate_vna_sweep(
    scene: &Scene,
    geometries: &[BistaticGeometry],
    angles_deg: &[f64],
    freqs_hz: &[f64],
    system_response: &[Complex64],
    noise: &NoiseSpec,
) -> Result<VnaSweep> {
    if geometries.is_empty() || freqs_hz.is_empty() {
        return Err(Error::arg("grid", "sweep grids must be non-empty"));
    }
    if geometries.len() != angles_deg.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} geometries for {} angles",
            geometries.len(),
            angles_deg.len()
        )));
    }
    if system_response.len() != freqs_hz.len() {
        return Err(Error::ShapeMismatch(format!(
            "system response has {} points, sweep has {}",
            system_response.len(),
            freqs_hz.len()
        )));
    }
    scene.validate()?;
    let target = scene.target_scatterers_at(0.0);
    let background = scene.background_at(0.0);
    let n_pol = Polarization::ALL.len();
    let build = |label: SweepLabel| -> Result<SweepRecord> {
        let mut rec = SweepRecord::zeros(label, freqs_hz.to_vec(), angles_deg.to_vec());
        let label_bit = match label {
            SweepLabel::DutBg => 0u64,
            SweepLabel::Bg => 1u64,
        };
        rec.traces_mut()
            .enumerate()
            .collect::<Vec<_>>()
            .into_par_iter()
            .try_for_each(|(i, trace)| -> Result<()> {
                let geom = &geometries[i / n_pol];
                let pol = Polarization::ALL[i % n_pol];
                accumulate_response(&background, geom, freqs_hz, pol, trace)?;
                if label == SweepLabel::DutBg {
                    accumulate_response(&target, geom, freqs_hz, pol, trace)?;
                }
                for (v, r) in trace.iter_mut().zip(system_response) {
                    *v *= r;
                }
                noise.add_to(trace, (i as u64) << 1 | label_bit);
                Ok(())
            })?;
        Ok(rec)
    };
    Ok(VnaSweep {
        dut_bg: build(SweepLabel::DutBg)?,
        bg: build(SweepLabel::Bg)?,
    })
}

/// Geometries realizing each bistatic angle with both antennas at
/// `range_m` from `target`, in the vertical x-z plane with the bisector
/// pointing down from the target. 180 degrees puts Tx, target and Rx on a
/// line.
pub fn flyover_sweep(betas_deg: &[f64], target: Vec3, range_m: f64) -> Result<Vec<BistaticGeometry>> {
    betas_deg
        .iter()
        .map(|&b| {
            if !(b > 0.0 && b <= 180.0) {
                return Err(Error::arg("beta", format!("{b} deg outside (0, 180]")));
            }
            BistaticGeometry::symmetric(target, b.to_radians(), range_m, -Vec3::Z, Vec3::Y)
        })
        .collect()
}
