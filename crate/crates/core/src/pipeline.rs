//! Streaming micro-Doppler acquisition: simulate, estimate and keep one
//! range bin per retained symbol without materializing the full cube.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{micro_doppler_spread, BistaticGeometry, Vec3};
use crate::mdproc::{estimate_symbol, range_profile, CarrierMap, RangeBinProbe, SlowTimeProfile};
use crate::scene::{PointScatterer, PolarimetricCoeff, Propeller, Scene};
use crate::simulate::{check_stop_and_go, simulate_symbol, NoiseSpec};
use crate::waveform::ReferenceSymbol;

/// Single-rotor micro-Doppler setup: rotor at the origin spinning about
/// `+z`, Tx and Rx in the horizontal plane at `range_m`, symmetric about
/// the `-x` direction, so the blade velocities lie at 90 degrees elevation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdScenario {
    pub beta_deg: f64,
    pub range_m: f64,
    pub n_propellers: usize,
    pub n_blades: usize,
    pub f_rot_hz: f64,
    pub blade_length_m: f64,
    pub points_per_blade: usize,
    pub phase0_rad: f64,
    /// Amplitude summed over one blade.
    pub blade_amplitude: f64,
    /// Hub return of the static body; 0 removes it.
    pub body_amplitude: f64,
}

impl Default for MdScenario {
    fn default() -> Self {
        Self {
            beta_deg: 60.0,
            range_m: 10.0,
            n_propellers: 1,
            n_blades: 2,
            f_rot_hz: 25.0,
            blade_length_m: 0.1655,
            points_per_blade: crate::scene::DEFAULT_POINTS_PER_BLADE,
            phase0_rad: 0.0,
            blade_amplitude: 1.0,
            body_amplitude: 1.0,
        }
    }
}

impl MdScenario {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=180.0).contains(&self.beta_deg) {
            return Err(Error::config("beta_deg", "must lie in [0, 180]"));
        }
        if !(self.range_m > 0.0 && self.range_m.is_finite()) {
            return Err(Error::config("range_m", "must be positive"));
        }
        if self.n_propellers > 1 {
            return Err(Error::config("n_propellers", "at most one propeller is supported"));
        }
        if self.range_m <= self.blade_length_m {
            return Err(Error::config("range_m", "antennas would sit inside the rotor disc"));
        }
        if !self.blade_amplitude.is_finite() || !self.body_amplitude.is_finite() {
            return Err(Error::config("blade_amplitude", "amplitudes must be finite"));
        }
        self.propeller().map(|_| ())
    }

    fn propeller(&self) -> Result<Propeller> {
        let p = self.points_per_blade.max(1);
        Propeller::new(
            Vec3::ZERO,
            Vec3::Z,
            self.n_blades,
            self.blade_length_m,
            self.f_rot_hz,
            self.phase0_rad,
            self.points_per_blade,
            PolarimetricCoeff::isotropic(self.blade_amplitude / p as f64),
        )
        .map_err(|e| match e {
            Error::InvalidArgument { name, reason } => Error::config(name, reason),
            other => other,
        })
    }

    pub fn scene(&self) -> Result<Scene> {
        self.validate()?;
        let mut scene = Scene::new();
        if self.n_propellers == 1 {
            scene = scene.with_propeller(self.propeller()?);
        }
        if self.body_amplitude != 0.0 {
            scene = scene.with_static(PointScatterer::fixed(
                Vec3::ZERO,
                PolarimetricCoeff::isotropic(self.body_amplitude),
            ));
        }
        Ok(scene)
    }

    pub fn geometry(&self) -> Result<BistaticGeometry> {
        BistaticGeometry::symmetric(Vec3::ZERO, self.beta_deg.to_radians(), self.range_m, -Vec3::X, Vec3::Z)
    }

    /// Blade line spacing `N_b f_rot`.
    pub fn line_spacing_hz(&self) -> f64 {
        self.n_blades as f64 * self.f_rot_hz
    }

    /// Two-sided spread from the closed-form relation at 90 degrees
    /// elevation.
    pub fn predicted_spread_hz(&self, center_freq_hz: f64) -> Result<f64> {
        if self.n_propellers == 0 {
            return Ok(0.0);
        }
        micro_doppler_spread(
            2.0 * std::f64::consts::PI * self.f_rot_hz,
            self.blade_length_m,
            self.beta_deg.to_radians(),
            std::f64::consts::FRAC_PI_2,
            crate::geometry::wavelength(center_freq_hz)?,
        )
    }

    /// Samples in one full rotation at `rate_hz`, when that is an integer.
    pub fn rotation_period_samples(&self, rate_hz: f64) -> Option<usize> {
        let p = rate_hz / self.f_rot_hz;
        (self.f_rot_hz > 0.0 && (p - p.round()).abs() < 1e-9).then(|| p.round() as usize)
    }
}

/// Detected range bin of a single received symbol.
pub fn detect_range_bin(y: &[Complex64], reference: &ReferenceSymbol, map: &CarrierMap) -> Result<usize> {
    let h = estimate_symbol(y, reference, map)?;
    Ok(range_profile(&map.to_active_grid(&h))?.peak_bin)
}

/// Slow-time profile of `n_samples` retained symbols (every `subsample`-th
/// transmitted symbol). The range bin is detected on symbol 0 unless
/// given. Equivalent to simulating the strided cube, estimating the channel
/// and extracting the bin.
#[allow(clippy::too_many_arguments)]
pub fn acquire_slow_time(
    scene: &Scene,
    geom: &BistaticGeometry,
    reference: &ReferenceSymbol,
    n_samples: usize,
    subsample: usize,
    noise: &NoiseSpec,
    bin: Option<usize>,
) -> Result<SlowTimeProfile> {
    if n_samples == 0 {
        return Err(Error::arg("n_samples", "need at least one sample"));
    }
    if subsample == 0 {
        return Err(Error::arg("subsample", "must be at least 1"));
    }
    let config = reference.config();
    scene.validate()?;
    check_stop_and_go(scene, config)?;
    let map = CarrierMap::new(reference);
    let freqs: Vec<f64> = config.active_range().map(|k| config.carrier_freq_hz(k)).collect();
    let bin = match bin {
        Some(b) if b < map.n_active => b,
        Some(b) => return Err(Error::arg("bin", format!("{b} outside 0..{}", map.n_active))),
        None => {
            let y0 = simulate_symbol(scene, geom, reference, &freqs, 0, noise)?;
            detect_range_bin(&y0, reference, &map)?
        }
    };
    let probe = RangeBinProbe::new(map.n_active, bin);
    let samples = (0..n_samples)
        .into_par_iter()
        .map(|m| {
            let y = simulate_symbol(scene, geom, reference, &freqs, (m * subsample) as u64, noise)?;
            let h = estimate_symbol(&y, reference, &map)?;
            Ok(probe.apply(&map.to_active_grid(&h)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SlowTimeProfile {
        samples,
        sample_rate_hz: config.symbol_rate_hz() / subsample as f64,
        range_bin: bin,
    })
}
