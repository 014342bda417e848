use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::{RunConfig, ScenarioKind};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "icas-sig", version, about = "Bistatic drone signature simulation and processing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Symbol stride when simulating, row decimation when processing.
    #[arg(long, value_name = "K")]
    pub subsample: Option<usize>,
    /// Retained symbols, counted after subsampling.
    #[arg(long, value_name = "N")]
    pub symbols: Option<usize>,
    #[arg(long, value_name = "DEG[,DEG...]", value_delimiter = ',')]
    pub beta_list: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate slow-time cubes of the rotor scene.
    SimulateMd(Common),
    /// Spectrum, spectrogram and line analysis of one or more cubes.
    ProcessMd {
        #[command(flatten)]
        common: Common,
        #[arg(required = true, value_name = "CUBE")]
        cubes: Vec<PathBuf>,
    },
    /// Simulate DUT_BG and BG sweep records.
    SimulateVna(Common),
    /// Reflectivity map from a DUT_BG/BG pair and optional system response.
    ProcessRefl {
        #[command(flatten)]
        common: Common,
        #[arg(value_name = "DUT_BG")]
        dut_bg: PathBuf,
        #[arg(value_name = "BG")]
        bg: PathBuf,
        #[arg(value_name = "SYSTEM")]
        system: Option<PathBuf>,
    },
    /// Run the acceptance checks and print the report.
    Verify(Common),
}

/// Loads the configuration and applies command-line overrides.
/// `kind` is what the configuration defaults to when no file is given.
pub fn resolve_config(common: &Common, kind: ScenarioKind, stage_is_simulation: bool) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig {
            kind,
            ..RunConfig::default()
        },
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.to_string_lossy().into_owned();
    }
    if let Some(k) = common.subsample {
        if stage_is_simulation {
            cfg.ofdm.subsample_factor = k;
        } else {
            cfg.processing.subsample = k;
        }
    }
    if let Some(n) = common.symbols {
        cfg.acquisition.n_symbols = n;
    }
    if let Some(b) = &common.beta_list {
        cfg.acquisition.beta_list_deg = b.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Number of worker threads from `ICAS_THREADS`, if set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("ICAS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config("ICAS_THREADS", format!("`{v}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Failed(e.to_string()))
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::SimulateMd(c) => {
            let cfg = resolve_config(&c, ScenarioKind::MicroDoppler, true)?;
            for p in commands::simulate_md(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::ProcessMd { common, cubes } => {
            let cfg = resolve_config(&common, ScenarioKind::MicroDoppler, false)?;
            for r in commands::process_md(&cfg, &cubes)? {
                println!(
                    "{}: {} lines, spacing {:.2} Hz, spread {:.1} Hz, {}",
                    r.cube,
                    r.n_lines,
                    r.spacing_hz,
                    r.spread_hz,
                    if r.resolved { "resolved" } else { "unresolved" }
                );
            }
        }
        Command::SimulateVna(c) => {
            let cfg = resolve_config(&c, ScenarioKind::VnaSweep, true)?;
            for p in commands::simulate_vna(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::ProcessRefl {
            common,
            dut_bg,
            bg,
            system,
        } => {
            let cfg = resolve_config(&common, ScenarioKind::VnaSweep, false)?;
            let map = commands::process_refl(&cfg, &dut_bg, &bg, system.as_deref())?;
            println!(
                "{} angles x {} frequencies, max {:.1} dB",
                map.angles_deg.len(),
                map.freqs_hz.len(),
                map.max_db()
            );
        }
        Command::Verify(c) => {
            let cfg = resolve_config(&c, ScenarioKind::MicroDoppler, false)?;
            let report = commands::verify(cfg.seed)?;
            print!("{}", report.render());
            if !report.all_passed() {
                return Err(CliError::Failed("verification failed".into()));
            }
        }
    }
    Ok(())
}
