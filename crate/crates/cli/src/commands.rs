//! Subcommand bodies. Each takes a validated [`RunConfig`] and writes its
//! outputs under the configured directory, returning the paths written.

use std::fs;
use std::path::{Path, PathBuf};

use icas_sig::mdproc::{
    detect_lines_with, doppler_spectrum, estimate_symbol, measure_spread_with, spectrogram, CarrierMap, LineAnalysis,
    RangeBinProbe, SlowTimeProfile, SpreadMeasurement,
};
use icas_sig::pipeline::{detect_range_bin, MdScenario};
use icas_sig::reflproc::{process_reflectivity, ReflectivityMap};
use icas_sig::scene::Polarization;
use icas_sig::simulate::{check_stop_and_go, flyover_sweep, simulate_symbol, simulate_vna_sweep};
use icas_sig::verify::{run_all, VerifyOptions, VerifyReport};
use icas_sig::waveform::build_reference;
use icas_sig::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, ScenarioKind};
use crate::cube::{CubeHeader, CubeReader, CubeWriter};
use crate::error::{CliError, CliResult};
use crate::output::{
    hash_hex, read_sweep, read_system_response, read_truth, write_csv, write_sweep, write_system_response,
    write_truth, CubeTruth,
};

/// Rows simulated or estimated per parallel batch.
const BATCH: usize = 512;

pub const DUT_BG_FILE: &str = "dut_bg.csv";
pub const BG_FILE: &str = "bg.csv";
pub const SYSTEM_FILE: &str = "system_response.csv";
pub const MAP_FILE: &str = "reflectivity_map.csv";
pub const MAP_DISPLAY_FILE: &str = "reflectivity_map_display.csv";

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn require_kind(cfg: &RunConfig, allowed: &[ScenarioKind], command: &str) -> CliResult<()> {
    if allowed.contains(&cfg.kind) {
        Ok(())
    } else {
        Err(CliError::config("kind", format!("{:?} scenarios cannot be run by {command}", cfg.kind)))
    }
}

pub fn cube_file_name(beta_deg: f64, listed: bool) -> String {
    if listed {
        format!("cube_beta{}.icb", format!("{beta_deg:07.3}").replace('.', "p"))
    } else {
        "cube.icb".to_string()
    }
}

/// Simulates one cube per bistatic angle, streaming rows to disk.
pub fn simulate_md(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    require_kind(cfg, &[ScenarioKind::MicroDoppler, ScenarioKind::Flyover], "simulate-md")?;
    let out_dir = PathBuf::from(&cfg.output_dir);
    ensure_dir(&out_dir)?;
    let hash = cfg.hash()?;
    let ofdm = &cfg.ofdm;
    let reference = build_reference(ofdm)?;
    let active_freqs: Vec<f64> = ofdm.active_range().map(|k| ofdm.carrier_freq_hz(k)).collect();
    let active = ofdm.active_range();
    let noise = cfg.noise();
    let n = cfg.acquisition.n_symbols;
    let stride = ofdm.subsample_factor;
    let listed = !cfg.acquisition.beta_list_deg.is_empty();
    let mut written = Vec::new();
    for beta in cfg.md_betas() {
        let scenario = MdScenario {
            beta_deg: beta,
            ..cfg.scenario.clone()
        };
        let scene = scenario.scene().map_err(scenario_error)?;
        let geom = scenario.geometry()?;
        check_stop_and_go(&scene, ofdm)?;
        let path = out_dir.join(cube_file_name(beta, listed));
        let mut w = CubeWriter::create(&path, CubeHeader::new(ofdm, n, hash)?)?;
        for start in (0..n).step_by(BATCH) {
            let rows = (start..(start + BATCH).min(n))
                .into_par_iter()
                .map(|m| {
                    let y = simulate_symbol(&scene, &geom, &reference, &active_freqs, (m * stride) as u64, &noise)?;
                    Ok(y[active.clone()].to_vec())
                })
                .collect::<icas_sig::Result<Vec<_>>>()?;
            for row in &rows {
                w.write_row(row)?;
            }
        }
        w.finish()?;
        write_truth(
            &path,
            &CubeTruth {
                tool_version: icas_sig::VERSION.to_string(),
                config_hash: hash_hex(hash),
                seed: cfg.seed,
                beta_deg: beta,
                n_propellers: scenario.n_propellers,
                n_blades: scenario.n_blades,
                f_rot_hz: scenario.f_rot_hz,
                blade_length_m: scenario.blade_length_m,
                line_spacing_hz: scenario.line_spacing_hz(),
                predicted_spread_hz: scenario.predicted_spread_hz(ofdm.center_freq_hz)?,
                n_symbols: n,
                subsample: stride,
                sample_rate_hz: ofdm.slow_time_rate_hz(),
            },
        )?;
        log::info!("wrote {} ({n} symbols, beta {beta} deg)", path.display());
        written.push(path);
    }
    Ok(written)
}

fn scenario_error(e: icas_sig::Error) -> CliError {
    match e {
        icas_sig::Error::InvalidConfig { field, reason } => CliError::config(format!("scenario.{field}"), reason),
        other => other.into(),
    }
}

/// Channel estimate at the tracked range bin for every kept cube row.
pub fn cube_profile(path: &Path, keep_every: usize) -> CliResult<(CubeHeader, SlowTimeProfile)> {
    let mut r = CubeReader::open(path)?;
    let header = r.header;
    let ofdm = header.ofdm();
    ofdm.validate().map_err(|e| CliError::format(path, format!("cube waveform: {e}")))?;
    let reference = build_reference(&ofdm)?;
    let map = CarrierMap::new(&reference);
    let first = ofdm.first_active();
    let expand = |row: Vec<Complex64>| {
        let mut y = vec![Complex64::new(0.0, 0.0); ofdm.n_carriers];
        y[first..first + row.len()].copy_from_slice(&row);
        y
    };
    let mut kept = Vec::new();
    let mut index = 0usize;
    while let Some(row) = r.read_row()? {
        if index.is_multiple_of(keep_every) {
            kept.push(row);
        }
        index += 1;
    }
    if kept.is_empty() {
        return Err(CliError::format(path, "cube has no rows"));
    }
    let bin = detect_range_bin(&expand(kept[0].clone()), &reference, &map)?;
    let probe = RangeBinProbe::new(map.n_active, bin);
    let mut samples = Vec::with_capacity(kept.len());
    for chunk in kept.chunks(BATCH) {
        let part = chunk
            .par_iter()
            .map(|row| {
                let h = estimate_symbol(&expand(row.clone()), &reference, &map)?;
                Ok(probe.apply(&map.to_active_grid(&h)))
            })
            .collect::<icas_sig::Result<Vec<_>>>()?;
        samples.extend(part);
    }
    let rate = 1.0 / (header.symbol_duration_s * header.stride as f64 * keep_every as f64);
    Ok((
        header,
        SlowTimeProfile {
            samples,
            sample_rate_hz: rate,
            range_bin: bin,
        },
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisRow {
    pub cube: String,
    pub beta_deg: Option<f64>,
    pub n_samples: usize,
    pub sample_rate_hz: f64,
    pub range_bin: usize,
    pub observation_s: f64,
    pub bin_width_hz: f64,
    pub n_lines: usize,
    pub spacing_hz: f64,
    pub expected_spacing_hz: Option<f64>,
    pub resolved: bool,
    pub note: String,
    pub lower_edge_hz: f64,
    pub upper_edge_hz: f64,
    pub spread_hz: f64,
    pub predicted_spread_hz: Option<f64>,
}

#[derive(Serialize)]
struct SpectrumRow {
    freq_hz: f64,
    magnitude: f64,
    level_db: f64,
}

#[derive(Serialize)]
struct SpectrogramRow {
    time_s: f64,
    freq_hz: f64,
    level_db: f64,
}

#[derive(Serialize)]
struct LineRow {
    freq_hz: f64,
    level_db: f64,
    fft_bin: usize,
}

#[derive(Serialize)]
struct SpreadRow {
    beta_deg: f64,
    spread_hz: f64,
    predicted_spread_hz: f64,
    spacing_hz: f64,
    resolved: bool,
}

fn rel_db(v: f64, peak: f64) -> f64 {
    if v > 0.0 && peak > 0.0 {
        20.0 * (v / peak).log10()
    } else {
        icas_sig::reflproc::MAP_FLOOR_DB
    }
}

fn analyse_cube(cfg: &RunConfig, hash: u64, cube: &Path, out_dir: &Path) -> CliResult<AnalysisRow> {
    ensure_dir(out_dir)?;
    let p = &cfg.processing;
    let (header, profile) = cube_profile(cube, p.subsample)?;
    let truth = read_truth(cube)?;
    let mut detector = p.lines.clone();
    if detector.expected_spacing_hz.is_none() {
        detector.expected_spacing_hz = truth.as_ref().filter(|t| t.n_propellers > 0).map(|t| t.line_spacing_hz);
    }
    if let Some(w) = truth.as_ref().and_then(|t| profile.aliasing_warning(t.predicted_spread_hz)) {
        log::warn!("{}: {w}", cube.display());
    }
    let n = profile.len();
    let spec = doppler_spectrum(&profile, p.pad_factor * n, p.window)?;
    let lines: LineAnalysis = detect_lines_with(&spec, &detector);
    let mut spread_opt = p.spread_options();
    spread_opt.detector = detector.clone();
    let spread: SpreadMeasurement = measure_spread_with(&spec, &spread_opt);
    if p.spectrogram_frame_len > n {
        return Err(CliError::config(
            "processing.spectrogram_frame_len",
            format!("{} exceeds the {n} available samples", p.spectrogram_frame_len),
        ));
    }
    let sg = spectrogram(&profile, p.spectrogram_frame_len, p.spectrogram_overlap, p.window)?;

    let extra = [("source_config_hash", hash_hex(header.config_hash))];
    let mag = spec.magnitude();
    let peak = mag.iter().cloned().fold(0.0, f64::max);
    write_csv(
        &out_dir.join("spectrum.csv"),
        hash,
        &extra,
        spec.freqs_hz.iter().zip(&mag).map(|(&f, &m)| SpectrumRow {
            freq_hz: f,
            magnitude: m,
            level_db: rel_db(m, peak),
        }),
    )?;
    let sg_peak = sg.magnitude.iter().cloned().fold(0.0, f64::max);
    write_csv(
        &out_dir.join("spectrogram.csv"),
        hash,
        &extra,
        (0..sg.n_frames()).flat_map(|i| {
            let t = sg.times_s[i];
            sg.frame(i)
                .iter()
                .zip(&sg.freqs_hz)
                .map(move |(&m, &f)| SpectrogramRow {
                    time_s: t,
                    freq_hz: f,
                    level_db: rel_db(m, sg_peak),
                })
                .collect::<Vec<_>>()
        }),
    )?;
    let line_extra = [
        ("source_config_hash", hash_hex(header.config_hash)),
        ("resolved", lines.resolved.to_string()),
        ("spacing_hz", lines.spacing_hz.to_string()),
    ];
    write_csv(
        &out_dir.join("lines.csv"),
        hash,
        &line_extra,
        lines.freqs_hz.iter().zip(&lines.amplitudes).zip(&lines.indices).map(|((&f, &a), &i)| LineRow {
            freq_hz: f,
            level_db: rel_db(a, peak),
            fft_bin: i,
        }),
    )?;
    let row = AnalysisRow {
        cube: cube.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        beta_deg: truth.as_ref().map(|t| t.beta_deg),
        n_samples: n,
        sample_rate_hz: profile.sample_rate_hz,
        range_bin: profile.range_bin,
        observation_s: lines.observation_s,
        bin_width_hz: lines.bin_width_hz,
        n_lines: lines.freqs_hz.len(),
        spacing_hz: lines.spacing_hz,
        expected_spacing_hz: detector.expected_spacing_hz,
        resolved: lines.resolved,
        note: lines.note.clone().unwrap_or_default(),
        lower_edge_hz: spread.lower_edge_hz,
        upper_edge_hz: spread.upper_edge_hz,
        spread_hz: spread.spread_hz,
        predicted_spread_hz: truth.as_ref().map(|t| t.predicted_spread_hz),
    };
    write_csv(&out_dir.join("analysis.csv"), hash, &extra, [row.clone()])?;
    Ok(row)
}

/// Spectrum, spectrogram and line analysis per cube; with several cubes
/// each goes to its own subdirectory and a spread table is added.
pub fn process_md(cfg: &RunConfig, cubes: &[PathBuf]) -> CliResult<Vec<AnalysisRow>> {
    if cubes.is_empty() {
        return Err(CliError::config("inputs", "no cube files given"));
    }
    let out_dir = PathBuf::from(&cfg.output_dir);
    let hash = cfg.hash()?;
    let mut rows = Vec::new();
    for cube in cubes {
        let dir = if cubes.len() == 1 {
            out_dir.clone()
        } else {
            out_dir.join(cube.file_stem().unwrap_or_default())
        };
        rows.push(analyse_cube(cfg, hash, cube, &dir)?);
    }
    if cubes.len() > 1 {
        let mut table: Vec<SpreadRow> = rows
            .iter()
            .filter_map(|r| {
                Some(SpreadRow {
                    beta_deg: r.beta_deg?,
                    spread_hz: r.spread_hz,
                    predicted_spread_hz: r.predicted_spread_hz?,
                    spacing_hz: r.spacing_hz,
                    resolved: r.resolved,
                })
            })
            .collect();
        table.sort_by(|a, b| a.beta_deg.total_cmp(&b.beta_deg));
        write_csv(&out_dir.join("spreads.csv"), hash, &[], table)?;
    }
    Ok(rows)
}

/// DUT_BG, BG and the system response the sweeps were recorded through.
pub fn simulate_vna(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    require_kind(cfg, &[ScenarioKind::VnaSweep], "simulate-vna")?;
    let out_dir = PathBuf::from(&cfg.output_dir);
    ensure_dir(&out_dir)?;
    let hash = cfg.hash()?;
    let v = &cfg.vna;
    let freqs = v.freqs_hz();
    let angles = v.angles_deg();
    let sys = v.system_response();
    let geoms = flyover_sweep(&angles, icas_sig::geometry::Vec3::ZERO, v.range_m)?;
    let sweep = simulate_vna_sweep(&v.scene(), &geoms, &angles, &freqs, &sys, &cfg.noise())?;
    let paths = [out_dir.join(DUT_BG_FILE), out_dir.join(BG_FILE), out_dir.join(SYSTEM_FILE)];
    write_sweep(&paths[0], &sweep.dut_bg, hash)?;
    write_sweep(&paths[1], &sweep.bg, hash)?;
    write_system_response(&paths[2], &freqs, &sys, hash)?;
    Ok(paths.to_vec())
}

#[derive(Serialize)]
struct MapRow {
    angle_deg: f64,
    pol: &'static str,
    freq_hz: f64,
    level_db: f64,
}

fn write_map(path: &Path, map: &ReflectivityMap, hash: u64, extra: &[(&str, String)]) -> CliResult<()> {
    let rows = map.angles_deg.iter().enumerate().flat_map(|(a, &angle)| {
        Polarization::ALL.into_iter().flat_map(move |pol| {
            (0..map.freqs_hz.len()).map(move |f| MapRow {
                angle_deg: angle,
                pol: pol.label(),
                freq_hz: map.freqs_hz[f],
                level_db: map.get(a, pol, f),
            })
        })
    });
    write_csv(path, hash, extra, rows)
}

/// Runs the reflectivity chain on a DUT_BG/BG pair. Without a system
/// response file the calibration is the identity.
pub fn process_refl(cfg: &RunConfig, dut_bg: &Path, bg: &Path, system: Option<&Path>) -> CliResult<ReflectivityMap> {
    let out_dir = PathBuf::from(&cfg.output_dir);
    ensure_dir(&out_dir)?;
    let hash = cfg.hash()?;
    let dut = read_sweep(dut_bg)?;
    let bgr = read_sweep(bg)?;
    let sys = match system {
        Some(p) => {
            let (freqs, resp) = read_system_response(p)?;
            if freqs != dut.freqs_hz {
                return Err(CliError::format(p, "frequency grid differs from the sweep records"));
            }
            resp
        }
        None => vec![Complex64::new(1.0, 0.0); dut.n_freqs()],
    };
    let res = process_reflectivity(&dut, &bgr, &sys, &cfg.gate)?;
    let extra = [
        ("gate_start_s", res.gate.start_s().to_string()),
        ("gate_stop_s", res.gate.stop_s().to_string()),
        ("reference_power", res.map.reference_power.to_string()),
        ("reference_distance_m", res.map.reference_distance_m.to_string()),
    ];
    write_map(&out_dir.join(MAP_FILE), &res.map, hash, &extra)?;
    let display = res.map.frequency_subset(cfg.vna.display_start_hz, cfg.vna.display_stop_hz);
    if display.freqs_hz.is_empty() {
        log::warn!("display band holds no processed frequencies; {MAP_DISPLAY_FILE} not written");
    } else {
        write_map(&out_dir.join(MAP_DISPLAY_FILE), &display, hash, &extra)?;
    }
    Ok(res.map)
}

pub fn verify(seed: u64) -> CliResult<VerifyReport> {
    Ok(run_all(&VerifyOptions {
        seed,
        ..VerifyOptions::default()
    })?)
}
