//! CSV and sidecar files. Every text output starts with a block of
//! `# key value` lines carrying the tool version and config hash.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use icas_sig::scene::Polarization;
use icas_sig::simulate::{SweepLabel, SweepRecord};
use icas_sig::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub fn hash_hex(hash: u64) -> String {
    format!("{hash:016x}")
}

pub fn header_block(hash: u64, extra: &[(&str, String)]) -> String {
    let mut s = format!("# tool icas-sig {}\n# config_hash {}\n", icas_sig::VERSION, hash_hex(hash));
    for (k, v) in extra {
        s.push_str(&format!("# {k} {v}\n"));
    }
    s
}

/// Leading `# key value` lines of a text file.
pub fn parse_header(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .map_while(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once(' '))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub fn write_csv<S: Serialize>(
    path: &Path,
    hash: u64,
    extra: &[(&str, String)],
    rows: impl IntoIterator<Item = S>,
) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::io(path, e);
    let mut w = csv::Writer::from_writer(header_block(hash, extra).into_bytes());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
    fs::write(path, bytes).map_err(io)
}

pub fn read_csv<D: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<(BTreeMap<String, String>, Vec<D>)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let header = parse_header(&text);
    let rows = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<D>, _>>()
        .map_err(|e| CliError::format(path, e.to_string()))?;
    Ok((header, rows))
}

#[derive(Debug, Serialize, Deserialize)]
struct SweepRow {
    angle_deg: f64,
    pol: String,
    freq_hz: f64,
    re: f64,
    im: f64,
}

fn label_name(label: SweepLabel) -> &'static str {
    match label {
        SweepLabel::DutBg => "DUT_BG",
        SweepLabel::Bg => "BG",
    }
}

/// One row per (angle, polarization, frequency), in storage order.
pub fn write_sweep(path: &Path, rec: &SweepRecord, hash: u64) -> CliResult<()> {
    let nf = rec.n_freqs();
    let rows = rec.data.iter().enumerate().map(|(i, v)| {
        let trace = i / nf;
        SweepRow {
            angle_deg: rec.angles_deg[trace / Polarization::ALL.len()],
            pol: Polarization::ALL[trace % Polarization::ALL.len()].label().to_string(),
            freq_hz: rec.freqs_hz[i % nf],
            re: v.re,
            im: v.im,
        }
    });
    write_csv(path, hash, &[("label", label_name(rec.label).to_string())], rows)
}

pub fn read_sweep(path: &Path) -> CliResult<SweepRecord> {
    let (header, rows) = read_csv::<SweepRow>(path)?;
    let label = match header.get("label").map(String::as_str) {
        Some("DUT_BG") => SweepLabel::DutBg,
        Some("BG") => SweepLabel::Bg,
        other => return Err(CliError::format(path, format!("sweep label {other:?}, expected DUT_BG or BG"))),
    };
    let Some(first) = rows.first() else {
        return Err(CliError::format(path, "no samples"));
    };
    let freqs: Vec<f64> = rows.iter().take_while(|r| r.angle_deg == first.angle_deg && r.pol == first.pol).map(|r| r.freq_hz).collect();
    let nf = freqs.len();
    let per_angle = nf * Polarization::ALL.len();
    if rows.len() % per_angle != 0 {
        return Err(CliError::format(path, format!("{} rows is not a whole number of angles", rows.len())));
    }
    let angles: Vec<f64> = rows.iter().step_by(per_angle).map(|r| r.angle_deg).collect();
    let mut rec = SweepRecord::zeros(label, freqs, angles);
    for (i, r) in rows.iter().enumerate() {
        let trace = i / nf;
        let want_pol = Polarization::ALL[trace % Polarization::ALL.len()];
        let ok = r.angle_deg == rec.angles_deg[trace / Polarization::ALL.len()]
            && Polarization::parse(&r.pol) == Some(want_pol)
            && r.freq_hz == rec.freqs_hz[i % nf];
        if !ok {
            return Err(CliError::format(path, format!("row {} breaks the angle/pol/freq ordering", i + 1)));
        }
        rec.data[i] = Complex64::new(r.re, r.im);
    }
    Ok(rec)
}

#[derive(Debug, Serialize, Deserialize)]
struct SystemRow {
    freq_hz: f64,
    re: f64,
    im: f64,
}

pub fn write_system_response(path: &Path, freqs: &[f64], response: &[Complex64], hash: u64) -> CliResult<()> {
    let rows = freqs.iter().zip(response).map(|(&f, v)| SystemRow {
        freq_hz: f,
        re: v.re,
        im: v.im,
    });
    write_csv(path, hash, &[], rows)
}

pub fn read_system_response(path: &Path) -> CliResult<(Vec<f64>, Vec<Complex64>)> {
    let (_, rows) = read_csv::<SystemRow>(path)?;
    Ok(rows.iter().map(|r| (r.freq_hz, Complex64::new(r.re, r.im))).unzip())
}

/// Ground truth written next to every simulated cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeTruth {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub beta_deg: f64,
    pub n_propellers: usize,
    pub n_blades: usize,
    pub f_rot_hz: f64,
    pub blade_length_m: f64,
    pub line_spacing_hz: f64,
    pub predicted_spread_hz: f64,
    pub n_symbols: usize,
    pub subsample: usize,
    pub sample_rate_hz: f64,
}

pub fn truth_path(cube: &Path) -> std::path::PathBuf {
    cube.with_extension("truth.toml")
}

pub fn write_truth(cube: &Path, truth: &CubeTruth) -> CliResult<()> {
    let path = truth_path(cube);
    let text = toml::to_string(truth).map_err(|e| CliError::Failed(e.to_string()))?;
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

/// The sidecar of `cube`, if there is one.
pub fn read_truth(cube: &Path) -> CliResult<Option<CubeTruth>> {
    let path = truth_path(cube);
    match fs::read_to_string(&path) {
        Ok(text) => toml::from_str(&text).map(Some).map_err(|e| CliError::format(&path, e.to_string())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(CliError::io(&path, e)),
    }
}
