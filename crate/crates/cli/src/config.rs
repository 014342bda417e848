//! Run configuration. Keys carry their unit as a suffix; unknown keys are
//! rejected.

use icas_sig::dsp::Window;
use icas_sig::geometry::Vec3;
use icas_sig::mdproc::{LineDetector, SpreadOptions};
use icas_sig::pipeline::MdScenario;
use icas_sig::reflproc::GateConfig;
use icas_sig::scene::{PointScatterer, PolarimetricCoeff, Scene};
use icas_sig::simulate::{default_system_response, linear_grid, NoiseSpec};
use icas_sig::verify::{reference_clutter, reference_target};
use icas_sig::waveform::OfdmConfig;
use icas_sig::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// One rotor at one bistatic angle.
    MicroDoppler,
    /// Stepped-frequency sweeps over a grid of bistatic angles.
    VnaSweep,
    /// The micro-Doppler scene repeated for every angle of `beta_list_deg`.
    Flyover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub output_dir: String,
    pub noise: NoiseConfig,
    pub ofdm: OfdmConfig,
    pub scenario: MdScenario,
    pub acquisition: AcquisitionConfig,
    pub processing: ProcessingConfig,
    pub vna: VnaConfig,
    pub gate: GateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::MicroDoppler,
            seed: 7,
            output_dir: "out".into(),
            noise: NoiseConfig::default(),
            ofdm: OfdmConfig::default(),
            scenario: MdScenario::default(),
            acquisition: AcquisitionConfig::default(),
            processing: ProcessingConfig::default(),
            vna: VnaConfig::default(),
            gate: GateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Complex standard deviation per sample, in the units of the channel.
    pub sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { sigma: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    /// Retained symbols, counted after subsampling.
    pub n_symbols: usize,
    pub beta_list_deg: Vec<f64>,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            n_symbols: 32768,
            beta_list_deg: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessingConfig {
    /// Keep every n-th cube row.
    pub subsample: usize,
    pub window: Window,
    /// FFT length as a multiple of the profile length.
    pub pad_factor: usize,
    pub spectrogram_frame_len: usize,
    pub spectrogram_overlap: usize,
    pub lines: LineDetector,
    pub spread: SpreadEdges,
}

impl Default for ProcessingConfig {
    fn default() -> Self {
        Self {
            subsample: 1,
            window: Window::Hann,
            pad_factor: 4,
            spectrogram_frame_len: 256,
            spectrogram_overlap: 192,
            lines: LineDetector::default(),
            spread: SpreadEdges::default(),
        }
    }
}

/// Spread-edge settings; the line detector is shared with `lines`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpreadEdges {
    pub edge_drop_db: f64,
    pub plateau_window_db: f64,
    pub noise_floor_percentile: f64,
    pub floor_margin_db: f64,
}

impl Default for SpreadEdges {
    fn default() -> Self {
        let d = SpreadOptions::default();
        Self {
            edge_drop_db: d.edge_drop_db,
            plateau_window_db: d.plateau_window_db,
            noise_floor_percentile: d.noise_floor_percentile,
            floor_margin_db: d.floor_margin_db,
        }
    }
}

impl ProcessingConfig {
    pub fn spread_options(&self) -> SpreadOptions {
        SpreadOptions {
            edge_drop_db: self.spread.edge_drop_db,
            plateau_window_db: self.spread.plateau_window_db,
            noise_floor_percentile: self.spread.noise_floor_percentile,
            floor_margin_db: self.spread.floor_margin_db,
            detector: self.lines.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetPreset {
    /// Three-point polarimetric test body.
    Reference,
    /// Unit isotropic point at the turntable center.
    Point,
    /// Only the entries of `scatterers` not flagged as background.
    Custom,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClutterPreset {
    Reference,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemPreset {
    /// Ripple plus 5 ns delay.
    Default,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScattererConfig {
    pub position_m: [f64; 3],
    /// Complex coefficients as `[re, im]`.
    pub hh: [f64; 2],
    pub hv: [f64; 2],
    pub vh: [f64; 2],
    pub vv: [f64; 2],
    pub background: bool,
}

impl Default for ScattererConfig {
    fn default() -> Self {
        Self {
            position_m: [0.0; 3],
            hh: [1.0, 0.0],
            hv: [0.0, 0.0],
            vh: [0.0, 0.0],
            vv: [1.0, 0.0],
            background: false,
        }
    }
}

impl ScattererConfig {
    fn scatterer(&self) -> PointScatterer {
        let c = |v: [f64; 2]| Complex64::new(v[0], v[1]);
        let [x, y, z] = self.position_m;
        PointScatterer::fixed(
            Vec3::new(x, y, z),
            PolarimetricCoeff::new(c(self.hh), c(self.hv), c(self.vh), c(self.vv)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VnaConfig {
    pub freq_start_hz: f64,
    pub freq_stop_hz: f64,
    pub n_freqs: usize,
    pub angle_start_deg: f64,
    pub angle_stop_deg: f64,
    pub angle_step_deg: f64,
    pub range_m: f64,
    pub target: TargetPreset,
    pub clutter: ClutterPreset,
    pub system_response: SystemPreset,
    pub scatterers: Vec<ScattererConfig>,
    /// Extra map output restricted to this band.
    pub display_start_hz: f64,
    pub display_stop_hz: f64,
}

impl Default for VnaConfig {
    fn default() -> Self {
        Self {
            freq_start_hz: 2e9,
            freq_stop_hz: 18e9,
            n_freqs: 1601,
            angle_start_deg: 10.0,
            angle_stop_deg: 180.0,
            angle_step_deg: 5.0,
            range_m: 3.0,
            target: TargetPreset::Reference,
            clutter: ClutterPreset::Reference,
            system_response: SystemPreset::Default,
            scatterers: Vec::new(),
            display_start_hz: 2e9,
            display_stop_hz: 10e9,
        }
    }
}

impl VnaConfig {
    pub fn freqs_hz(&self) -> Vec<f64> {
        linear_grid(self.freq_start_hz, self.freq_stop_hz, self.n_freqs)
    }

    pub fn angles_deg(&self) -> Vec<f64> {
        let n = ((self.angle_stop_deg - self.angle_start_deg) / self.angle_step_deg + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.angle_start_deg + self.angle_step_deg * i as f64).collect()
    }

    pub fn system_response(&self) -> Vec<Complex64> {
        let freqs = self.freqs_hz();
        match self.system_response {
            SystemPreset::Default => default_system_response(&freqs),
            SystemPreset::Identity => vec![Complex64::new(1.0, 0.0); freqs.len()],
        }
    }

    pub fn scene(&self) -> Scene {
        let mut scene = Scene::new();
        scene.static_scatterers = match self.target {
            TargetPreset::Reference => reference_target(),
            TargetPreset::Point => vec![PointScatterer::fixed(Vec3::ZERO, PolarimetricCoeff::isotropic(1.0))],
            TargetPreset::Custom => self.scatterers.iter().filter(|s| !s.background).map(|s| s.scatterer()).collect(),
            TargetPreset::None => Vec::new(),
        };
        if self.clutter == ClutterPreset::Reference {
            scene.background_scatterers = reference_clutter();
        }
        scene
            .background_scatterers
            .extend(self.scatterers.iter().filter(|s| s.background).map(|s| s.scatterer()));
        scene
    }

    fn validate(&self) -> CliResult<()> {
        let bad = |field: &str, reason: &str| Err(CliError::config(format!("vna.{field}"), reason));
        if !(self.freq_start_hz > 0.0 && self.freq_stop_hz > self.freq_start_hz && self.freq_stop_hz.is_finite()) {
            return bad("freq_stop_hz", "need 0 < freq_start_hz < freq_stop_hz");
        }
        if self.n_freqs < 2 {
            return bad("n_freqs", "need at least 2 frequencies");
        }
        if self.angle_step_deg.is_nan() || self.angle_step_deg <= 0.0 {
            return bad("angle_step_deg", "must be positive");
        }
        if !(self.angle_start_deg > 0.0 && self.angle_stop_deg <= 180.0 && self.angle_stop_deg >= self.angle_start_deg) {
            return bad("angle_start_deg", "angles must lie in (0, 180] with start <= stop");
        }
        if !(self.range_m > 0.0 && self.range_m.is_finite()) {
            return bad("range_m", "must be positive");
        }
        if self.target != TargetPreset::Custom && self.scatterers.iter().any(|s| !s.background) {
            return bad("scatterers", "target scatterers are only used with target = \"custom\"");
        }
        if self.display_stop_hz.is_nan() || self.display_stop_hz <= self.display_start_hz {
            return bad("display_stop_hz", "must exceed display_start_hz");
        }
        for (i, s) in self.scatterers.iter().enumerate() {
            let finite = s.position_m.iter().chain(&s.hh).chain(&s.hv).chain(&s.vh).chain(&s.vv).all(|v| v.is_finite());
            if !finite {
                return Err(CliError::config(format!("vna.scatterers[{i}]"), "values must be finite"));
            }
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::config("config", e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        let core = |field: &str, e: icas_sig::Error| match e {
            icas_sig::Error::InvalidConfig { field: f, reason } => CliError::config(format!("{field}.{f}"), reason),
            other => CliError::config(field, other.to_string()),
        };
        self.ofdm.validate().map_err(|e| core("ofdm", e))?;
        self.scenario.validate().map_err(|e| core("scenario", e))?;
        self.gate.validate().map_err(|e| core("gate", e))?;
        NoiseSpec::new(self.noise.sigma, self.seed).map_err(|e| core("noise", e))?;
        if self.acquisition.n_symbols == 0 {
            return Err(CliError::config("acquisition.n_symbols", "must be positive"));
        }
        for (i, b) in self.acquisition.beta_list_deg.iter().enumerate() {
            if !(0.0..=180.0).contains(b) {
                return Err(CliError::config(format!("acquisition.beta_list_deg[{i}]"), "must lie in [0, 180]"));
            }
        }
        if self.kind == ScenarioKind::Flyover && self.acquisition.beta_list_deg.is_empty() {
            return Err(CliError::config("acquisition.beta_list_deg", "a flyover needs at least one angle"));
        }
        let p = &self.processing;
        if p.subsample == 0 {
            return Err(CliError::config("processing.subsample", "must be at least 1"));
        }
        if p.pad_factor == 0 {
            return Err(CliError::config("processing.pad_factor", "must be at least 1"));
        }
        if p.spectrogram_frame_len < 2 || p.spectrogram_overlap >= p.spectrogram_frame_len {
            return Err(CliError::config(
                "processing.spectrogram_overlap",
                "need frame_len >= 2 and overlap < frame_len",
            ));
        }
        if !(0.0..=100.0).contains(&p.spread.noise_floor_percentile) {
            return Err(CliError::config("processing.spread.noise_floor_percentile", "must lie in [0, 100]"));
        }
        self.vna.validate()
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            sigma: self.noise.sigma,
            seed: self.seed,
        }
    }

    /// Bistatic angles of the micro-Doppler run: the list when given, the
    /// scenario angle otherwise.
    pub fn md_betas(&self) -> Vec<f64> {
        if self.acquisition.beta_list_deg.is_empty() {
            vec![self.scenario.beta_deg]
        } else {
            self.acquisition.beta_list_deg.clone()
        }
    }

    /// First 8 bytes of the SHA-256 of the canonical serialization, with
    /// the output directory left out.
    pub fn hash(&self) -> CliResult<u64> {
        let canonical = RunConfig {
            output_dir: String::new(),
            ..self.clone()
        };
        let digest = Sha256::digest(canonical.to_toml()?.as_bytes());
        let mut b = [0u8; 8];
        b.copy_from_slice(&digest[..8]);
        Ok(u64::from_le_bytes(b))
    }
}
