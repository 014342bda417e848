//! Micro-Doppler processing: channel estimation, range detection,
//! slow-time extraction and the spectral line analysis.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{amplitude_db, median, percentile, FftPair, Window};
use crate::error::{Error, Result};
use crate::simulate::SlowTimeCube;
use crate::waveform::ReferenceSymbol;

/// Carrier bookkeeping shared by every estimate of one reference symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierMap {
    /// Absolute carrier index of each data carrier.
    pub carriers: Vec<usize>,
    /// Position of each data carrier inside the active block.
    pub active_offsets: Vec<usize>,
    pub n_active: usize,
}

impl CarrierMap {
    pub fn new(reference: &ReferenceSymbol) -> Self {
        let first = reference.config().first_active();
        let carriers = reference.data_carriers();
        let active_offsets = carriers.iter().map(|k| k - first).collect();
        Self {
            carriers,
            active_offsets,
            n_active: reference.config().n_active,
        }
    }

    pub fn len(&self) -> usize {
        self.carriers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.carriers.is_empty()
    }

    /// Spreads data-carrier values over the uniform active grid, with
    /// zeros at pilot positions.
    pub fn to_active_grid(&self, h: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_active];
        for (&o, &v) in self.active_offsets.iter().zip(h) {
            out[o] = v;
        }
        out
    }
}

/// `H(f, m)` on the active non-pilot carriers, symbol-major.
#[derive(Debug, Clone)]
pub struct ChannelEstimateCube {
    pub map: CarrierMap,
    pub n_symbols: usize,
    pub symbol_rate_hz: f64,
    pub data: Vec<Complex64>,
}

impl ChannelEstimateCube {
    pub fn symbol(&self, m: usize) -> &[Complex64] {
        let n = self.map.len();
        &self.data[m * n..(m + 1) * n]
    }
}

/// `Y / X` on the data carriers of one received symbol.
pub fn estimate_symbol(y: &[Complex64], reference: &ReferenceSymbol, map: &CarrierMap) -> Result<Vec<Complex64>> {
    let x = reference.spectrum();
    if y.len() != x.len() {
        return Err(Error::ShapeMismatch(format!(
            "symbol has {} carriers, reference {}",
            y.len(),
            x.len()
        )));
    }
    map.carriers
        .iter()
        .map(|&k| {
            if x[k].norm() == 0.0 {
                Err(Error::ZeroDivisor {
                    what: "reference carrier",
                    index: k,
                })
            } else {
                Ok(y[k] / x[k])
            }
        })
        .collect()
}

pub fn estimate_channel(cube: &SlowTimeCube, reference: &ReferenceSymbol) -> Result<ChannelEstimateCube> {
    if &cube.config != reference.config() {
        return Err(Error::ShapeMismatch("cube and reference use different OFDM configurations".into()));
    }
    let map = CarrierMap::new(reference);
    let mut data = Vec::with_capacity(cube.n_symbols * map.len());
    for m in 0..cube.n_symbols {
        data.extend(estimate_symbol(cube.symbol(m), reference, &map)?);
    }
    Ok(ChannelEstimateCube {
        n_symbols: cube.n_symbols,
        symbol_rate_hz: cube.row_rate_hz(),
        map,
        data,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub bins: Vec<Complex64>,
    pub peak_bin: usize,
}

/// Inverse transform of one symbol's channel over a uniform carrier grid;
/// the detected bin is the magnitude argmax.
pub fn range_profile(h: &[Complex64]) -> Result<RangeProfile> {
    if h.len() < 8 {
        return Err(Error::arg("h", "need at least 8 carriers"));
    }
    let mut bins = h.to_vec();
    FftPair::new(bins.len()).inverse(&mut bins);
    let peak_bin = bins
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(RangeProfile { bins, peak_bin })
}

/// Single range bin of [`range_profile`], evaluated directly.
#[derive(Debug, Clone)]
pub struct RangeBinProbe {
    bin: usize,
    kernel: Vec<Complex64>,
}

impl RangeBinProbe {
    pub fn new(n: usize, bin: usize) -> Self {
        let kernel = (0..n)
            .map(|k| Complex64::from_polar(1.0 / n as f64, 2.0 * PI * ((k * bin) % n) as f64 / n as f64))
            .collect();
        Self { bin, kernel }
    }

    pub fn bin(&self) -> usize {
        self.bin
    }

    pub fn apply(&self, h: &[Complex64]) -> Complex64 {
        h.iter().zip(&self.kernel).map(|(a, b)| a * b).sum()
    }
}

/// One range bin tracked across symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowTimeProfile {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
    pub range_bin: usize,
}

impl SlowTimeProfile {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Warning text when a predicted spread would alias at this rate.
    pub fn aliasing_warning(&self, predicted_spread_hz: f64) -> Option<String> {
        (predicted_spread_hz > self.sample_rate_hz).then(|| {
            format!(
                "predicted micro-Doppler spread {predicted_spread_hz:.1} Hz exceeds the slow-time rate {:.1} Hz; the spectrum will alias",
                self.sample_rate_hz
            )
        })
    }
}

/// `s[m] = range_profile(H(., m k))[bin]`.
pub fn slow_time_extract(cube: &ChannelEstimateCube, bin: usize, subsample: usize) -> Result<SlowTimeProfile> {
    if subsample == 0 {
        return Err(Error::arg("subsample", "must be at least 1"));
    }
    if bin >= cube.map.n_active {
        return Err(Error::arg("bin", format!("{bin} outside 0..{}", cube.map.n_active)));
    }
    let probe = RangeBinProbe::new(cube.map.n_active, bin);
    let samples = (0..cube.n_symbols)
        .step_by(subsample)
        .map(|m| probe.apply(&cube.map.to_active_grid(cube.symbol(m))))
        .collect();
    Ok(SlowTimeProfile {
        samples,
        sample_rate_hz: cube.symbol_rate_hz / subsample as f64,
        range_bin: bin,
    })
}

/// Like [`slow_time_extract`], logging a warning when `predicted_spread_hz`
/// would alias.
pub fn slow_time_extract_checked(
    cube: &ChannelEstimateCube,
    bin: usize,
    subsample: usize,
    predicted_spread_hz: f64,
) -> Result<SlowTimeProfile> {
    let profile = slow_time_extract(cube, bin, subsample)?;
    if let Some(w) = profile.aliasing_warning(predicted_spread_hz) {
        log::warn!("{w}");
    }
    Ok(profile)
}

/// DC-centered Doppler spectrum; the axis covers `(-fs/2, fs/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DopplerSpectrum {
    pub freqs_hz: Vec<f64>,
    /// Scaled so a unit complex exponential on a bin reads 1.
    pub values: Vec<Complex64>,
    pub window: Window,
    pub n_samples: usize,
    pub sample_rate_hz: f64,
}

impl DopplerSpectrum {
    pub fn n_fft(&self) -> usize {
        self.values.len()
    }

    pub fn bin_width_hz(&self) -> f64 {
        self.sample_rate_hz / self.n_fft() as f64
    }

    pub fn observation_s(&self) -> f64 {
        self.n_samples as f64 / self.sample_rate_hz
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Nearest output index to `freq_hz`.
    pub fn index_of(&self, freq_hz: f64) -> usize {
        let n = self.n_fft() as f64;
        let i = (freq_hz / self.bin_width_hz()).round() + ((self.n_fft() - 1) / 2) as f64;
        i.clamp(0.0, n - 1.0) as usize
    }
}

fn centered_offset(n: usize) -> usize {
    (n - 1) / 2
}

/// Windowed, zero-padded and centered transform of `samples`.
fn centered_transform(samples: &[Complex64], n_fft: usize, window: Window, fft: &FftPair) -> Vec<Complex64> {
    let w = window.coefficients(samples.len());
    let gain: f64 = w.iter().sum();
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for ((b, s), wi) in buf.iter_mut().zip(samples).zip(&w) {
        *b = s * wi;
    }
    fft.forward(&mut buf);
    let off = centered_offset(n_fft);
    (0..n_fft).map(|i| buf[(i + n_fft - off) % n_fft] / gain).collect()
}

fn centered_axis(n_fft: usize, fs: f64) -> Vec<f64> {
    let off = centered_offset(n_fft) as f64;
    (0..n_fft).map(|i| (i as f64 - off) * fs / n_fft as f64).collect()
}

pub fn doppler_spectrum(profile: &SlowTimeProfile, n_fft: usize, window: Window) -> Result<DopplerSpectrum> {
    if profile.is_empty() {
        return Err(Error::arg("profile", "empty slow-time profile"));
    }
    if n_fft < profile.len() {
        return Err(Error::arg("n_fft", format!("{n_fft} is shorter than the profile ({})", profile.len())));
    }
    let fft = FftPair::new(n_fft);
    Ok(DopplerSpectrum {
        freqs_hz: centered_axis(n_fft, profile.sample_rate_hz),
        values: centered_transform(&profile.samples, n_fft, window, &fft),
        window,
        n_samples: profile.len(),
        sample_rate_hz: profile.sample_rate_hz,
    })
}

/// STFT magnitude, frame-major (`n_frames x frame_len`).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub times_s: Vec<f64>,
    pub freqs_hz: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub frame_len: usize,
    pub hop: usize,
    pub window: Window,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.times_s.len()
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.magnitude[i * self.frame_len..(i + 1) * self.frame_len]
    }
}

pub fn spectrogram(profile: &SlowTimeProfile, frame_len: usize, overlap: usize, window: Window) -> Result<Spectrogram> {
    if frame_len == 0 || frame_len > profile.len() {
        return Err(Error::arg("frame_len", format!("must lie in 1..={}", profile.len())));
    }
    if overlap >= frame_len {
        return Err(Error::arg("overlap", "must be smaller than the frame length"));
    }
    let hop = frame_len - overlap;
    let n_frames = (profile.len() - frame_len) / hop + 1;
    let fft = FftPair::new(frame_len);
    let mut magnitude = Vec::with_capacity(n_frames * frame_len);
    let mut times_s = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let start = i * hop;
        let frame = &profile.samples[start..start + frame_len];
        magnitude.extend(centered_transform(frame, frame_len, window, &fft).iter().map(|v| v.norm()));
        times_s.push((start as f64 + frame_len as f64 / 2.0) / profile.sample_rate_hz);
    }
    Ok(Spectrogram {
        times_s,
        freqs_hz: centered_axis(frame_len, profile.sample_rate_hz),
        magnitude,
        frame_len,
        hop,
        window,
    })
}

/// Tunables of the line detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineDetector {
    /// Minimum line height above the median noise floor.
    pub threshold_db: f64,
    /// Lines more than this far below the strongest one are ignored.
    pub dynamic_range_db: f64,
    /// A candidate must exceed the leakage of every stronger accepted line
    /// by this factor.
    pub leakage_margin: f64,
    /// Median peak-to-valley ratio a resolved comb must reach.
    pub min_prominence: f64,
    /// Fraction of lines that must sit on the comb of the estimated spacing.
    pub comb_fraction: f64,
    /// When known, observations shorter than two periods of this spacing
    /// are reported as unresolved without further analysis.
    pub expected_spacing_hz: Option<f64>,
}

impl Default for LineDetector {
    fn default() -> Self {
        Self {
            threshold_db: 20.0,
            dynamic_range_db: 60.0,
            leakage_margin: 2.0,
            min_prominence: 2.0,
            comb_fraction: 0.9,
            expected_spacing_hz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineAnalysis {
    /// Interpolated line frequencies, ascending.
    pub freqs_hz: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Spectrum indices of the line peaks.
    pub indices: Vec<usize>,
    /// Median of successive gaps; 0 with fewer than two lines.
    pub spacing_hz: f64,
    /// Span between the outermost detected lines.
    pub spread_hz: f64,
    pub noise_floor: f64,
    pub observation_s: f64,
    pub bin_width_hz: f64,
    pub resolved: bool,
    /// Why the comb was declared unresolved, if it was.
    pub note: Option<String>,
}

impl LineAnalysis {
    pub fn strongest(&self) -> Option<usize> {
        self.amplitudes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
    }
}

pub fn detect_lines(spec: &DopplerSpectrum, threshold_db_above_noise: f64) -> LineAnalysis {
    detect_lines_with(
        spec,
        &LineDetector {
            threshold_db: threshold_db_above_noise,
            ..LineDetector::default()
        },
    )
}

pub fn detect_lines_with(spec: &DopplerSpectrum, det: &LineDetector) -> LineAnalysis {
    let mag = spec.magnitude();
    let n = mag.len();
    let t_obs = spec.observation_s();
    let df = spec.bin_width_hz();
    let floor = median(&mag);
    let peak = mag.iter().cloned().fold(0.0, f64::max);
    let thr = (floor * 10f64.powf(det.threshold_db / 20.0)).max(peak * 10f64.powf(-det.dynamic_range_db / 20.0));

    let mut out = LineAnalysis {
        freqs_hz: Vec::new(),
        amplitudes: Vec::new(),
        indices: Vec::new(),
        spacing_hz: 0.0,
        spread_hz: 0.0,
        noise_floor: floor,
        observation_s: t_obs,
        bin_width_hz: df,
        resolved: false,
        note: None,
    };

    let mut cand: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| mag[i] >= mag[i - 1] && mag[i] > mag[i + 1] && mag[i] > thr)
        .collect();
    cand.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));
    let env = spec.window.leakage_envelope(spec.n_samples, n);
    let mut acc: Vec<usize> = Vec::new();
    for i in cand {
        let clear = acc.iter().all(|&j| {
            let d = i.abs_diff(j).min(env.len() - 1);
            mag[i] > det.leakage_margin * mag[j] * env[d]
        });
        if clear {
            acc.push(i);
        }
    }
    acc.sort_unstable();

    for &i in &acc {
        let (a, b, c) = (mag[i - 1].ln(), mag[i].ln(), mag[i + 1].ln());
        let den = a - 2.0 * b + c;
        let d = if den != 0.0 && den.is_finite() { 0.5 * (a - c) / den } else { 0.0 };
        out.freqs_hz.push(spec.freqs_hz[i] + d * df);
        out.amplitudes.push(mag[i]);
    }
    out.indices = acc.clone();
    if out.freqs_hz.len() >= 2 {
        let gaps: Vec<f64> = out.freqs_hz.windows(2).map(|w| w[1] - w[0]).collect();
        out.spacing_hz = median(&gaps);
        out.spread_hz = out.freqs_hz[out.freqs_hz.len() - 1] - out.freqs_hz[0];
    }

    if let Some(e) = det.expected_spacing_hz {
        if t_obs * e < 2.0 {
            out.note = Some(format!(
                "observation {:.2} ms shorter than two line periods ({:.2} ms)",
                t_obs * 1e3,
                2e3 / e
            ));
            return out;
        }
    }
    if acc.len() < 3 {
        out.note = Some(format!("only {} line(s) detected", acc.len()));
        return out;
    }
    if out.spacing_hz * t_obs < 2.0 {
        out.note = Some(format!(
            "line spacing {:.2} Hz below the resolution bound {:.2} Hz",
            out.spacing_hz,
            2.0 / t_obs
        ));
        return out;
    }
    let prominence: Vec<f64> = (0..acc.len())
        .map(|k| {
            let i = acc[k];
            let mut valley = 0.0f64;
            if k > 0 {
                valley = valley.max(mag[acc[k - 1]..=i].iter().cloned().fold(f64::INFINITY, f64::min));
            }
            if k + 1 < acc.len() {
                valley = valley.max(mag[i..=acc[k + 1]].iter().cloned().fold(f64::INFINITY, f64::min));
            }
            mag[i] / valley
        })
        .collect();
    if median(&prominence) < det.min_prominence {
        out.note = Some("lines not separated by spectral valleys".into());
        return out;
    }
    let f0 = out.freqs_hz[out.strongest().expect("non-empty")];
    let on_comb = out
        .freqs_hz
        .iter()
        .filter(|&&f| {
            let r = (f - f0) / out.spacing_hz;
            (r - r.round()).abs() * out.spacing_hz <= 1.0 / t_obs
        })
        .count();
    if (on_comb as f64) < det.comb_fraction * acc.len() as f64 {
        out.note = Some(format!("{on_comb} of {} lines on a regular comb", acc.len()));
        return out;
    }
    out.resolved = true;
    out
}

/// Per-line Fourier coefficients `a_k = (1/P) sum x[n] exp(-j 2 pi k n / P)`
/// over the first `period_samples` samples, k = 0..P.
pub fn fourier_line_oracle(profile: &SlowTimeProfile, period_samples: usize) -> Result<Vec<Complex64>> {
    if period_samples == 0 {
        return Err(Error::arg("period_samples", "must be positive"));
    }
    if profile.len() < 2 * period_samples {
        return Err(Error::arg("profile", "need at least two periods"));
    }
    let p = period_samples;
    let x = &profile.samples[..p];
    Ok((0..p)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(n, v)| v * Complex64::from_polar(1.0, -2.0 * PI * ((k * n) % p) as f64 / p as f64))
                .sum::<Complex64>()
                / p as f64
        })
        .collect())
}

/// Tunables of the spread estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpreadOptions {
    /// The band edge is where side lines fall this far below their
    /// plateau level.
    pub edge_drop_db: f64,
    /// Side lines within this distance of the strongest side line form the
    /// plateau.
    pub plateau_window_db: f64,
    /// Percentile of the spectrum magnitude used as noise floor.
    pub noise_floor_percentile: f64,
    /// The edge level never drops below floor plus this margin.
    pub floor_margin_db: f64,
    pub detector: LineDetector,
}

impl Default for SpreadOptions {
    fn default() -> Self {
        Self {
            edge_drop_db: 10.5,
            plateau_window_db: 20.0,
            noise_floor_percentile: 50.0,
            floor_margin_db: 20.0,
            detector: LineDetector::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadMeasurement {
    pub lower_edge_hz: f64,
    pub upper_edge_hz: f64,
    pub center_hz: f64,
    pub spread_hz: f64,
    pub edge_level_db: f64,
}

pub fn measure_spread(spec: &DopplerSpectrum, noise_floor_percentile: f64) -> SpreadMeasurement {
    measure_spread_with(
        spec,
        &SpreadOptions {
            noise_floor_percentile,
            ..SpreadOptions::default()
        },
    )
}

/// Two-sided extent of the blade band around the strongest (body) line.
pub fn measure_spread_with(spec: &DopplerSpectrum, opt: &SpreadOptions) -> SpreadMeasurement {
    let lines = detect_lines_with(spec, &opt.detector);
    let floor_db = amplitude_db(percentile(&spec.magnitude(), opt.noise_floor_percentile));
    let Some(c) = lines.strongest() else {
        return SpreadMeasurement {
            lower_edge_hz: 0.0,
            upper_edge_hz: 0.0,
            center_hz: 0.0,
            spread_hz: 0.0,
            edge_level_db: floor_db + opt.floor_margin_db,
        };
    };
    let pos = &lines.freqs_hz;
    let f0 = pos[c];
    let adb: Vec<f64> = lines.amplitudes.iter().map(|&a| amplitude_db(a)).collect();
    let side: Vec<usize> = (0..pos.len()).filter(|&i| i != c).collect();
    let level = if side.is_empty() {
        floor_db + opt.floor_margin_db
    } else {
        let top = side.iter().map(|&i| adb[i]).fold(f64::NEG_INFINITY, f64::max);
        let plateau: Vec<f64> = side
            .iter()
            .map(|&i| adb[i])
            .filter(|&v| v >= top - opt.plateau_window_db)
            .collect();
        (median(&plateau) - opt.edge_drop_db).max(floor_db + opt.floor_margin_db)
    };
    let edge = |sign: f64| -> f64 {
        let mut idx: Vec<usize> = side.iter().copied().filter(|&i| sign * (pos[i] - f0) > 0.0).collect();
        idx.sort_by(|&a, &b| (sign * pos[a]).total_cmp(&(sign * pos[b])));
        let Some(k) = idx.iter().rposition(|&i| adb[i] >= level) else {
            return f0;
        };
        let i = idx[k];
        match idx.get(k + 1) {
            Some(&j) => pos[i] + (adb[i] - level) / (adb[i] - adb[j]) * (pos[j] - pos[i]),
            None => pos[i],
        }
    };
    let upper = edge(1.0);
    let lower = edge(-1.0);
    SpreadMeasurement {
        lower_edge_hz: lower,
        upper_edge_hz: upper,
        center_hz: f0,
        spread_hz: upper - lower,
        edge_level_db: level,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, fs: f64, n: usize) -> SlowTimeProfile {
        SlowTimeProfile {
            samples: (0..n)
                .map(|i| Complex64::from_polar(1.0, 2.0 * PI * freq * i as f64 / fs))
                .collect(),
            sample_rate_hz: fs,
            range_bin: 0,
        }
    }

    #[test]
    fn axis_is_half_open_on_the_left() {
        let ax = centered_axis(8, 8.0);
        assert_eq!(ax, vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
        let ax = centered_axis(5, 5.0);
        assert_eq!(ax, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn constant_profile_gives_dc_line() {
        let p = tone(0.0, 1000.0, 256);
        let s = doppler_spectrum(&p, 256, Window::Rectangular).unwrap();
        let mag = s.magnitude();
        let i = s.index_of(0.0);
        assert!((mag[i] - 1.0).abs() < 1e-12);
        assert!(mag.iter().enumerate().all(|(k, &m)| k == i || m < 1e-12));
    }

    #[test]
    fn tone_lands_on_its_bin() {
        let fs = 15625.0;
        let p = tone(50.0, fs, 4096);
        let s = doppler_spectrum(&p, 16384, Window::Hann).unwrap();
        let mag = s.magnitude();
        let imax = (0..mag.len()).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
        assert!((s.freqs_hz[imax] - 50.0).abs() <= s.bin_width_hz());
    }

    #[test]
    fn short_fft_rejected() {
        let p = tone(0.0, 1.0, 16);
        assert!(doppler_spectrum(&p, 8, Window::Hann).is_err());
    }

    #[test]
    fn range_profile_peaks() {
        let n = 64;
        let flat = vec![Complex64::new(1.0, 0.0); n];
        assert_eq!(range_profile(&flat).unwrap().peak_bin, 0);
        let delayed: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * 9.0 * k as f64 / n as f64))
            .collect();
        let rp = range_profile(&delayed).unwrap();
        assert_eq!(rp.peak_bin, 9);
        let probe = RangeBinProbe::new(n, 9);
        assert!((probe.apply(&delayed) - rp.bins[9]).norm() < 1e-12);
        assert!(range_profile(&flat[..7]).is_err());
    }

    #[test]
    fn two_tone_comb_detected() {
        let fs = 2000.0;
        let n = 2000;
        let samples: Vec<Complex64> = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                (-3..=3)
                    .map(|k| Complex64::from_polar(1.0 / (1.0 + (k as f64).abs()), 2.0 * PI * 40.0 * k as f64 * t))
                    .sum()
            })
            .collect();
        let p = SlowTimeProfile {
            samples,
            sample_rate_hz: fs,
            range_bin: 0,
        };
        let s = doppler_spectrum(&p, 4 * n, Window::Hann).unwrap();
        let la = detect_lines(&s, 20.0);
        assert!(la.resolved, "{:?}", la.note);
        assert_eq!(la.freqs_hz.len(), 7);
        assert!((la.spacing_hz - 40.0).abs() < s.bin_width_hz());
        assert!((la.spread_hz - 240.0).abs() < 2.0 * s.bin_width_hz());
    }

    #[test]
    fn oracle_of_exponential() {
        let p = tone(1.0, 16.0, 64);
        let a = fourier_line_oracle(&p, 16).unwrap();
        assert!((a[1] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(a.iter().enumerate().all(|(k, v)| k == 1 || v.norm() < 1e-12));
        let c = tone(0.0, 16.0, 64);
        let a = fourier_line_oracle(&c, 16).unwrap();
        assert!((a[0].norm() - 1.0).abs() < 1e-12);
        assert!(a[1..].iter().all(|v| v.norm() < 1e-12));
        assert!(fourier_line_oracle(&p, 40).is_err());
    }

    #[test]
    fn static_spread_is_zero() {
        let p = tone(0.0, 1000.0, 1024);
        let s = doppler_spectrum(&p, 4096, Window::Hann).unwrap();
        assert_eq!(measure_spread(&s, 50.0).spread_hz, 0.0);
    }

    #[test]
    fn spectrogram_shape_and_ridge() {
        let p = tone(125.0, 1000.0, 1000);
        let sg = spectrogram(&p, 64, 48, Window::Hann).unwrap();
        assert_eq!(sg.hop, 16);
        assert_eq!(sg.n_frames(), (1000 - 64) / 16 + 1);
        let ridge = sg.freqs_hz.iter().position(|&f| (f - 125.0).abs() < 1e-9).unwrap();
        for i in 0..sg.n_frames() {
            assert!((sg.frame(i)[ridge] - 1.0).abs() < 1e-9);
        }
        assert!(spectrogram(&p, 2000, 0, Window::Hann).is_err());
    }
}
