//! Slow-time cube file.
//!
//! A fixed 64-byte little-endian header followed by `n_symbols` rows of
//! `n_active` complex samples, each stored as two `f32` (re, im). Rows hold
//! the received spectrum on the active carriers only.
//!
//! | offset | type    | field                         |
//! |--------|---------|-------------------------------|
//! | 0      | [u8; 8] | magic `ICASCUB1`              |
//! | 8      | u32     | format version (1)            |
//! | 12     | u32     | n_carriers                    |
//! | 16     | u32     | n_symbols (rows)              |
//! | 20     | u32     | stride between stored symbols |
//! | 24     | u32     | n_active                      |
//! | 28     | u32     | pilot stride                  |
//! | 32     | f64     | center frequency, Hz          |
//! | 40     | f64     | carrier spacing, Hz           |
//! | 48     | f64     | symbol duration, s            |
//! | 56     | u64     | config hash                   |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use icas_sig::waveform::OfdmConfig;
use icas_sig::Complex64;

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 8] = b"ICASCUB1";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeHeader {
    pub n_carriers: u32,
    pub n_symbols: u32,
    pub stride: u32,
    pub n_active: u32,
    pub pilot_stride: u32,
    pub center_freq_hz: f64,
    pub carrier_spacing_hz: f64,
    pub symbol_duration_s: f64,
    pub config_hash: u64,
}

fn narrow(field: &str, v: usize) -> CliResult<u32> {
    u32::try_from(v).map_err(|_| CliError::config(field, format!("{v} does not fit the cube header")))
}

impl CubeHeader {
    pub fn new(cfg: &OfdmConfig, n_symbols: usize, config_hash: u64) -> CliResult<Self> {
        Ok(Self {
            n_carriers: narrow("ofdm.n_carriers", cfg.n_carriers)?,
            n_symbols: narrow("acquisition.n_symbols", n_symbols)?,
            stride: narrow("ofdm.subsample_factor", cfg.subsample_factor)?,
            n_active: narrow("ofdm.n_active", cfg.n_active)?,
            pilot_stride: narrow("ofdm.pilot_stride", cfg.pilot_stride)?,
            center_freq_hz: cfg.center_freq_hz,
            carrier_spacing_hz: cfg.carrier_spacing_hz(),
            symbol_duration_s: cfg.symbol_duration_s,
            config_hash,
        })
    }

    /// Waveform the cube was recorded with.
    pub fn ofdm(&self) -> OfdmConfig {
        OfdmConfig {
            center_freq_hz: self.center_freq_hz,
            bandwidth_hz: self.carrier_spacing_hz * self.n_carriers as f64,
            n_carriers: self.n_carriers as usize,
            n_active: self.n_active as usize,
            symbol_duration_s: self.symbol_duration_s,
            pilot_stride: self.pilot_stride as usize,
            subsample_factor: self.stride as usize,
        }
    }

    pub fn row_bytes(&self) -> usize {
        self.n_active as usize * 8
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..8].copy_from_slice(MAGIC);
        b[8..12].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
        b[12..16].copy_from_slice(&self.n_carriers.to_le_bytes());
        b[16..20].copy_from_slice(&self.n_symbols.to_le_bytes());
        b[20..24].copy_from_slice(&self.stride.to_le_bytes());
        b[24..28].copy_from_slice(&self.n_active.to_le_bytes());
        b[28..32].copy_from_slice(&self.pilot_stride.to_le_bytes());
        b[32..40].copy_from_slice(&self.center_freq_hz.to_le_bytes());
        b[40..48].copy_from_slice(&self.carrier_spacing_hz.to_le_bytes());
        b[48..56].copy_from_slice(&self.symbol_duration_s.to_le_bytes());
        b[56..64].copy_from_slice(&self.config_hash.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8; HEADER_LEN]) -> Result<Self, String> {
        if &b[0..8] != MAGIC {
            return Err("not a cube file (bad magic)".into());
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().expect("4 bytes"));
        let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().expect("8 bytes"));
        let version = u32_at(8);
        if version != FORMAT_VERSION {
            return Err(format!("unsupported cube version {version}"));
        }
        Ok(Self {
            n_carriers: u32_at(12),
            n_symbols: u32_at(16),
            stride: u32_at(20),
            n_active: u32_at(24),
            pilot_stride: u32_at(28),
            center_freq_hz: f64_at(32),
            carrier_spacing_hz: f64_at(40),
            symbol_duration_s: f64_at(48),
            config_hash: u64::from_le_bytes(b[56..64].try_into().expect("8 bytes")),
        })
    }
}

pub struct CubeWriter {
    path: PathBuf,
    out: BufWriter<File>,
    header: CubeHeader,
    rows: u32,
}

impl CubeWriter {
    pub fn create(path: &Path, header: CubeHeader) -> CliResult<Self> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut out = BufWriter::with_capacity(1 << 20, file);
        out.write_all(&header.to_bytes()).map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
            header,
            rows: 0,
        })
    }

    pub fn write_row(&mut self, row: &[Complex64]) -> CliResult<()> {
        if row.len() != self.header.n_active as usize {
            return Err(CliError::Failed(format!(
                "cube row has {} samples, header says {}",
                row.len(),
                self.header.n_active
            )));
        }
        if self.rows == self.header.n_symbols {
            return Err(CliError::Failed("more rows than declared in the cube header".into()));
        }
        let mut buf = Vec::with_capacity(row.len() * 8);
        for v in row {
            buf.extend_from_slice(&(v.re as f32).to_le_bytes());
            buf.extend_from_slice(&(v.im as f32).to_le_bytes());
        }
        self.out.write_all(&buf).map_err(|e| CliError::io(&self.path, e))?;
        self.rows += 1;
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<()> {
        if self.rows != self.header.n_symbols {
            return Err(CliError::Failed(format!(
                "cube closed after {} of {} rows",
                self.rows, self.header.n_symbols
            )));
        }
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

pub struct CubeReader {
    path: PathBuf,
    input: BufReader<File>,
    pub header: CubeHeader,
    remaining: u32,
}

impl CubeReader {
    pub fn open(path: &Path) -> CliResult<Self> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let len = file.metadata().map_err(|e| CliError::io(path, e))?.len();
        let mut input = BufReader::with_capacity(1 << 20, file);
        let mut b = [0u8; HEADER_LEN];
        input
            .read_exact(&mut b)
            .map_err(|_| CliError::format(path, "shorter than the 64-byte header"))?;
        let header = CubeHeader::from_bytes(&b).map_err(|r| CliError::format(path, r))?;
        let want = HEADER_LEN as u64 + header.n_symbols as u64 * header.row_bytes() as u64;
        if len != want {
            return Err(CliError::format(path, format!("{len} bytes, header implies {want}")));
        }
        Ok(Self {
            path: path.to_path_buf(),
            input,
            header,
            remaining: header.n_symbols,
        })
    }

    /// Next row, or `None` at the end of the cube.
    pub fn read_row(&mut self) -> CliResult<Option<Vec<Complex64>>> {
        if self.remaining == 0 {
            return Ok(None);
        }
        let mut raw = vec![0u8; self.header.row_bytes()];
        self.input.read_exact(&mut raw).map_err(|e| CliError::io(&self.path, e))?;
        self.remaining -= 1;
        Ok(Some(
            raw.chunks_exact(8)
                .map(|c| {
                    let re = f32::from_le_bytes(c[0..4].try_into().expect("4 bytes"));
                    let im = f32::from_le_bytes(c[4..8].try_into().expect("4 bytes"));
                    Complex64::new(re as f64, im as f64)
                })
                .collect(),
        ))
    }
}
