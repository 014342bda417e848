//! Static reflectivity chain: one-term calibration, background
//! subtraction, time-domain gating and global normalization.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{power_db, FftPair};
use crate::error::{Error, Result};
use crate::scene::Polarization;
use crate::simulate::{uniform_step, SweepRecord};

/// Power floor for cells with no return at all.
pub const MAP_FLOOR_DB: f64 = -300.0;

/// Distance from target to each antenna the maps are conditioned on.
pub const REFERENCE_DISTANCE_M: f64 = 3.0;

/// Divides every trace by `system_response`.
pub fn calibrate(record: &SweepRecord, system_response: &[Complex64]) -> Result<SweepRecord> {
    record.check_consistent()?;
    if system_response.len() != record.n_freqs() {
        return Err(Error::ShapeMismatch(format!(
            "system response has {} points, record {}",
            system_response.len(),
            record.n_freqs()
        )));
    }
    if let Some(index) = system_response.iter().position(|r| r.norm() == 0.0) {
        return Err(Error::ZeroDivisor {
            what: "system response sample",
            index,
        });
    }
    let mut out = record.clone();
    for trace in out.traces_mut() {
        for (v, r) in trace.iter_mut().zip(system_response) {
            *v /= r;
        }
    }
    Ok(out)
}

/// `dut_bg - bg` per cell; the result keeps the DUT_BG label.
pub fn background_subtract(dut_bg: &SweepRecord, bg: &SweepRecord) -> Result<SweepRecord> {
    dut_bg.check_consistent()?;
    bg.check_consistent()?;
    if !dut_bg.same_grid(bg) {
        return Err(Error::ShapeMismatch("DUT_BG and BG records use different grids".into()));
    }
    let mut out = dut_bg.clone();
    for (a, b) in out.data.iter_mut().zip(&bg.data) {
        *a -= b;
    }
    Ok(out)
}

/// Flat-top time gate with raised-cosine edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSpec {
    pub center_s: f64,
    pub width_s: f64,
    /// Fraction of the width taken by each tapered edge.
    pub taper_fraction: f64,
}

pub const DEFAULT_GATE_WIDTH_S: f64 = 3e-9;
pub const DEFAULT_TAPER_FRACTION: f64 = 0.1;

impl GateSpec {
    pub fn new(center_s: f64, width_s: f64, taper_fraction: f64) -> Result<Self> {
        if !center_s.is_finite() {
            return Err(Error::arg("center_s", "must be finite"));
        }
        if !(width_s > 0.0 && width_s.is_finite()) {
            return Err(Error::arg("width_s", "must be positive"));
        }
        if !(0.0..=0.5).contains(&taper_fraction) {
            return Err(Error::arg("taper_fraction", "must lie in [0, 0.5]"));
        }
        Ok(Self {
            center_s,
            width_s,
            taper_fraction,
        })
    }

    pub fn start_s(&self) -> f64 {
        self.center_s - self.width_s / 2.0
    }

    pub fn stop_s(&self) -> f64 {
        self.center_s + self.width_s / 2.0
    }

    /// Gate weight at delay `t`.
    pub fn weight(&self, t: f64) -> f64 {
        let (a, b) = (self.start_s(), self.stop_s());
        if t < a || t > b {
            return 0.0;
        }
        let taper = self.taper_fraction * self.width_s;
        let edge = (t - a).min(b - t);
        if taper == 0.0 || edge >= taper {
            1.0
        } else {
            0.5 - 0.5 * (PI * edge / taper).cos()
        }
    }
}

/// Strictly positive band weighting applied before gating and removed
/// afterwards; it keeps the impulse response compact in delay.
fn band_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * (k + 1) as f64 / (n + 1) as f64).cos())
        .collect()
}

fn check_grid(freqs: &[f64]) -> Result<f64> {
    if freqs.len() < 2 {
        return Err(Error::arg("freqs", "need at least two frequency points"));
    }
    match uniform_step(freqs) {
        Some(df) if df > 0.0 => Ok(df),
        _ => Err(Error::arg("freqs", "gating needs a uniform ascending grid")),
    }
}

/// Band-weighted impulse response of one trace; sample `n` sits at delay
/// `n / (N df)`.
pub fn impulse_response(s21: &[Complex64], freqs: &[f64]) -> Result<Vec<Complex64>> {
    check_grid(freqs)?;
    if s21.len() != freqs.len() {
        return Err(Error::ShapeMismatch("trace and grid lengths differ".into()));
    }
    let w = band_window(s21.len());
    let mut buf: Vec<Complex64> = s21.iter().zip(&w).map(|(v, wi)| v * wi).collect();
    FftPair::new(buf.len()).inverse(&mut buf);
    Ok(buf)
}

/// Gates one trace in the delay domain and returns to frequency.
pub fn time_gate(s21: &[Complex64], freqs: &[f64], gate: &GateSpec) -> Result<Vec<Complex64>> {
    let df = check_grid(freqs)?;
    let span = 1.0 / df;
    if gate.start_s() < 0.0 || gate.stop_s() >= span {
        return Err(Error::GateOutOfRange {
            start_s: gate.start_s(),
            stop_s: gate.stop_s(),
            span_s: span,
        });
    }
    let n = s21.len();
    let mut buf = impulse_response(s21, freqs)?;
    let dt = span / n as f64;
    for (i, v) in buf.iter_mut().enumerate() {
        *v *= gate.weight(i as f64 * dt);
    }
    FftPair::new(n).forward(&mut buf);
    Ok(buf.iter().zip(band_window(n)).map(|(v, w)| v / w).collect())
}

/// Gate of `width_s` centered on the strongest delay of the record, the
/// power being summed over all traces.
pub fn auto_gate(record: &SweepRecord, width_s: f64, taper_fraction: f64) -> Result<GateSpec> {
    record.check_consistent()?;
    let df = check_grid(&record.freqs_hz)?;
    let n = record.n_freqs();
    let mut power = vec![0.0; n];
    for trace in record.data.chunks_exact(n) {
        for (p, v) in power.iter_mut().zip(impulse_response(trace, &record.freqs_hz)?) {
            *p += v.norm_sqr();
        }
    }
    let peak = (0..n).max_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap_or(0);
    let span = 1.0 / df;
    // keep the gate inside the unambiguous span
    let half = width_s / 2.0;
    let center = (peak as f64 * span / n as f64).clamp(half, (span - half - span / n as f64).max(half));
    GateSpec::new(center, width_s, taper_fraction)
}

/// Applies `gate` to every trace of `record`.
pub fn gate_record(record: &SweepRecord, gate: &GateSpec) -> Result<SweepRecord> {
    record.check_consistent()?;
    let mut out = record.clone();
    let freqs = record.freqs_hz.clone();
    out.traces_mut()
        .collect::<Vec<_>>()
        .into_par_iter()
        .try_for_each(|trace| -> Result<()> {
            let g = time_gate(trace, &freqs, gate)?;
            trace.copy_from_slice(&g);
            Ok(())
        })?;
    Ok(out)
}

/// Normalized power in dB over (angle, polarization, frequency).
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectivityMap {
    pub angles_deg: Vec<f64>,
    pub freqs_hz: Vec<f64>,
    pub db: Vec<f64>,
    /// Linear `|S21|^2` that maps to 0 dB.
    pub reference_power: f64,
    pub reference_distance_m: f64,
}

impl ReflectivityMap {
    pub fn get(&self, angle: usize, pol: Polarization, freq: usize) -> f64 {
        let nf = self.freqs_hz.len();
        self.db[(angle * Polarization::ALL.len() + pol.index()) * nf + freq]
    }

    pub fn max_db(&self) -> f64 {
        self.db.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cells with `lo <= f <= hi`, in the same order as the full map.
    pub fn frequency_subset(&self, lo_hz: f64, hi_hz: f64) -> ReflectivityMap {
        let keep: Vec<usize> = (0..self.freqs_hz.len())
            .filter(|&i| self.freqs_hz[i] >= lo_hz && self.freqs_hz[i] <= hi_hz)
            .collect();
        let nf = self.freqs_hz.len();
        let db = self
            .db
            .chunks_exact(nf)
            .flat_map(|row| keep.iter().map(move |&i| row[i]))
            .collect();
        ReflectivityMap {
            angles_deg: self.angles_deg.clone(),
            freqs_hz: keep.iter().map(|&i| self.freqs_hz[i]).collect(),
            db,
            reference_power: self.reference_power,
            reference_distance_m: self.reference_distance_m,
        }
    }
}

/// `|S21|^2` divided by its global maximum over every angle, frequency
/// and polarization, in dB.
pub fn reflectivity_map(record: &SweepRecord) -> Result<ReflectivityMap> {
    record.check_consistent()?;
    let power: Vec<f64> = record.data.iter().map(|v| v.norm_sqr()).collect();
    let reference = power.iter().cloned().fold(0.0, f64::max);
    let db = power
        .iter()
        .map(|&p| {
            if reference == 0.0 || p == 0.0 {
                MAP_FLOOR_DB
            } else {
                power_db(p / reference).max(MAP_FLOOR_DB)
            }
        })
        .collect();
    Ok(ReflectivityMap {
        angles_deg: record.angles_deg.clone(),
        freqs_hz: record.freqs_hz.clone(),
        db,
        reference_power: reference,
        reference_distance_m: REFERENCE_DISTANCE_M,
    })
}

/// Gate placement for the full chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    /// Fixed gate center; `None` centers on the strongest delay.
    pub center_s: Option<f64>,
    pub width_s: f64,
    pub taper_fraction: f64,
    /// Band trimmed from each end of the gated sweep before mapping;
    /// `None` uses one inverse gate width.
    pub edge_guard_hz: Option<f64>,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            center_s: None,
            width_s: DEFAULT_GATE_WIDTH_S,
            taper_fraction: DEFAULT_TAPER_FRACTION,
            edge_guard_hz: None,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.center_s {
            GateSpec::new(c, self.width_s, self.taper_fraction)?;
        } else {
            GateSpec::new(0.0, self.width_s, self.taper_fraction)?;
        }
        if let Some(g) = self.edge_guard_hz {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::arg("edge_guard_hz", "must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn guard_hz(&self) -> f64 {
        self.edge_guard_hz.unwrap_or(1.0 / self.width_s)
    }
}

/// Frequency indices at least `guard_hz` away from both band edges.
pub fn guarded_band(freqs: &[f64], guard_hz: f64) -> Result<std::ops::Range<usize>> {
    let (Some(&lo), Some(&hi)) = (freqs.first(), freqs.last()) else {
        return Err(Error::arg("freqs", "empty grid"));
    };
    let start = freqs.iter().position(|&f| f >= lo + guard_hz).unwrap_or(freqs.len());
    let stop = freqs.iter().rposition(|&f| f <= hi - guard_hz).map_or(0, |i| i + 1);
    if start >= stop {
        return Err(Error::arg("edge_guard_hz", "guard band leaves no frequencies"));
    }
    Ok(start..stop)
}

#[derive(Debug, Clone)]
pub struct ReflectivityResult {
    pub map: ReflectivityMap,
    pub gate: GateSpec,
    /// Calibrated, subtracted and gated record the map was built from.
    pub processed: SweepRecord,
}

/// calibrate -> subtract -> gate -> normalize. Gating distorts the
/// response near the band edges, so the guard band is dropped before
/// normalization.
pub fn process_reflectivity(
    dut_bg: &SweepRecord,
    bg: &SweepRecord,
    system_response: &[Complex64],
    gate: &GateConfig,
) -> Result<ReflectivityResult> {
    gate.validate()?;
    let diff = background_subtract(&calibrate(dut_bg, system_response)?, &calibrate(bg, system_response)?)?;
    let spec = match gate.center_s {
        Some(c) => GateSpec::new(c, gate.width_s, gate.taper_fraction)?,
        None => auto_gate(&diff, gate.width_s, gate.taper_fraction)?,
    };
    let band = guarded_band(&diff.freqs_hz, gate.guard_hz())?;
    let processed = gate_record(&diff, &spec)?.frequency_slice(band);
    Ok(ReflectivityResult {
        map: reflectivity_map(&processed)?,
        gate: spec,
        processed,
    })
}
