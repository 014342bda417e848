use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use icas_sig_cli::config::{ClutterPreset, RunConfig, ScattererConfig, ScenarioKind, SystemPreset, TargetPreset};
use icas_sig_cli::cube::{CubeHeader, CubeReader, HEADER_LEN};
use icas_sig_cli::output::{parse_header, read_sweep, read_truth};
use icas_sig_cli::CliError;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_icas-sig"));
    c.env_remove("ICAS_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn icas-sig")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, cfg: &RunConfig) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    path
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

fn assert_stamped(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    let h = parse_header(&text);
    assert_eq!(h.get("tool").map(String::as_str), Some(concat!("icas-sig ", env!("CARGO_PKG_VERSION"))), "{}", path.display());
    assert_eq!(h.get("config_hash").map(|s| s.len()), Some(16), "{}", path.display());
}

#[test]
fn config_round_trip_is_identity() {
    let mut cfg = RunConfig {
        kind: ScenarioKind::Flyover,
        seed: 99,
        ..RunConfig::default()
    };
    cfg.acquisition.beta_list_deg = vec![0.0, 37.5, 150.0];
    cfg.gate.center_s = Some(20e-9);
    cfg.gate.edge_guard_hz = Some(2.5e8);
    cfg.processing.lines.expected_spacing_hz = Some(50.0);
    cfg.vna.target = TargetPreset::Custom;
    cfg.vna.scatterers = vec![
        ScattererConfig {
            position_m: [0.01, -0.02, 0.0],
            hv: [0.1, -0.3],
            ..ScattererConfig::default()
        },
        ScattererConfig {
            position_m: [1.0, 2.0, 0.5],
            background: true,
            ..ScattererConfig::default()
        },
    ];
    for c in [RunConfig::default(), cfg] {
        let text = c.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml().unwrap(), text);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
    }
    let moved = RunConfig {
        output_dir: "elsewhere".into(),
        ..RunConfig::default()
    };
    assert_eq!(moved.hash().unwrap(), RunConfig::default().hash().unwrap());
    let reseeded = RunConfig {
        seed: 8,
        ..RunConfig::default()
    };
    assert_ne!(reseeded.hash().unwrap(), RunConfig::default().hash().unwrap());
    assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
}

#[test]
fn config_errors_name_the_field() {
    let cases = [
        ("[ofdm]\nn_active = 5000\n", "ofdm.n_active"),
        ("[scenario]\nbeta_deg = 200.0\n", "scenario.beta_deg"),
        ("[acquisition]\nn_symbols = 0\n", "acquisition.n_symbols"),
        ("[vna]\nangle_step_deg = 0.0\n", "vna.angle_step_deg"),
        ("kind = \"flyover\"\n", "acquisition.beta_list_deg"),
        ("[processing]\nspectrogram_overlap = 256\n", "processing.spectrogram_overlap"),
    ];
    for (text, field) in cases {
        match RunConfig::from_toml(text) {
            Err(CliError::Config { field: f, .. }) => assert_eq!(f, field, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
    let e = RunConfig::from_toml("[scenario]\nf_rot = 25.0\n").unwrap_err();
    assert_eq!(e.exit_code(), 2);
    assert!(e.to_string().contains("f_rot"), "{e}");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[ofdm]\ncenter_freq_hz = -1.0\n").unwrap();
    let out = run(&["simulate-md", "--config", p(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ofdm.center_freq_hz"));

    let out = run(&["simulate-md", "--config", p(&dir.path().join("missing.toml"))]);
    assert_eq!(out.status.code(), Some(1));

    let junk = dir.path().join("junk.icb");
    fs::write(&junk, vec![7u8; 200]).unwrap();
    let out = run(&["process-md", "--out", p(&dir.path().join("o")), p(&junk)]);
    assert_eq!(out.status.code(), Some(3));

    let out = bin()
        .env("ICAS_THREADS", "many")
        .args(["simulate-md", "--symbols", "16", "--out", p(&dir.path().join("t"))])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["simulate-vna", "--config", p(&write_config(dir.path(), "md.toml", &RunConfig::default()))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cube_header_layout() {
    let cfg = RunConfig::default();
    let h = CubeHeader::new(&cfg.ofdm, 1234, 0xdead_beef_0123_4567).unwrap();
    let b = h.to_bytes();
    assert_eq!(b.len(), HEADER_LEN);
    assert_eq!(&b[..8], b"ICASCUB1");
    assert_eq!(u32::from_le_bytes(b[16..20].try_into().unwrap()), 1234);
    assert_eq!(f64::from_le_bytes(b[32..40].try_into().unwrap()), 3.7e9);
    assert_eq!(CubeHeader::from_bytes(&b).unwrap(), h);
    assert_eq!(h.ofdm(), cfg.ofdm);
    let mut bad = b;
    bad[0] = b'X';
    assert!(CubeHeader::from_bytes(&bad).is_err());
}

#[test]
fn simulate_md_is_deterministic_and_stamped() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    ok(&["simulate-md", "--symbols", "256", "--seed", "3", "--out", p(&a)]);
    ok(&["simulate-md", "--symbols", "256", "--seed", "3", "--out", p(&b)]);
    ok(&["simulate-md", "--symbols", "256", "--seed", "4", "--out", p(&c)]);
    let cube = |d: &Path| fs::read(d.join("cube.icb")).unwrap();
    assert!(cube(&a) == cube(&b));
    assert!(cube(&a) != cube(&c));
    assert_eq!(fs::read(a.join("cube.truth.toml")).unwrap(), fs::read(b.join("cube.truth.toml")).unwrap());

    let r = CubeReader::open(&a.join("cube.icb")).unwrap();
    assert_eq!(cube(&a).len(), HEADER_LEN + 256 * 1280 * 8);
    let truth = read_truth(&a.join("cube.icb")).unwrap().unwrap();
    assert_eq!(truth.config_hash, format!("{:016x}", r.header.config_hash));
    assert_eq!((truth.n_blades, truth.f_rot_hz, truth.beta_deg), (2, 25.0, 60.0));
    assert!((truth.predicted_spread_hz - 1110.68).abs() < 0.01);

    let (pa, pb) = (dir.path().join("pa"), dir.path().join("pb"));
    ok(&["process-md", "--out", p(&pa), p(&a.join("cube.icb"))]);
    ok(&["process-md", "--out", p(&pb), p(&b.join("cube.icb"))]);
    for f in ["spectrum.csv", "spectrogram.csv", "lines.csv", "analysis.csv"] {
        assert_stamped(&pa.join(f));
        assert!(fs::read(pa.join(f)).unwrap() == fs::read(pb.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn default_run_reports_fifty_hertz_lines() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate-md", "--out", p(&sim)]);
    let cube = sim.join("cube.icb");
    assert_eq!(CubeReader::open(&cube).unwrap().header.n_symbols, 32768);
    let out = dir.path().join("proc");
    ok(&["process-md", "--out", p(&out), p(&cube)]);
    let a = out.join("analysis.csv");
    assert_eq!(column(&a, "resolved"), ["true"]);
    let spacing: f64 = column(&a, "spacing_hz")[0].parse().unwrap();
    let bin: f64 = column(&a, "bin_width_hz")[0].parse().unwrap();
    assert!((spacing - 50.0).abs() <= bin, "{spacing} vs 50 +- {bin}");
    let n_frames = column(&out.join("spectrogram.csv"), "time_s").len() / 256;
    assert_eq!(n_frames, (32768 - 256) / 64 + 1);
}

#[test]
fn short_cube_is_unresolved() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate-md", "--symbols", "1024", "--subsample", "1", "--out", p(&sim)]);
    let out = dir.path().join("proc");
    ok(&["process-md", "--out", p(&out), p(&sim.join("cube.icb"))]);
    assert_eq!(column(&out.join("analysis.csv"), "resolved"), ["false"]);
    assert_eq!(parse_header(&fs::read_to_string(out.join("lines.csv")).unwrap())["resolved"], "false");
}

#[test]
fn beta_sweep_spreads_decrease() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    let stdout = ok(&["simulate-md", "--symbols", "8192", "--beta-list", "0,60,120,150", "--out", p(&sim)]);
    let cubes: Vec<&str> = stdout.lines().collect();
    assert_eq!(cubes.len(), 4);
    let out = dir.path().join("proc");
    let mut args = vec!["process-md", "--out", p(&out)];
    args.extend(cubes.iter().rev());
    ok(&args);
    let table = out.join("spreads.csv");
    assert_stamped(&table);
    let betas: Vec<f64> = column(&table, "beta_deg").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(betas, [0.0, 60.0, 120.0, 150.0]);
    let spreads: Vec<f64> = column(&table, "spread_hz").iter().map(|s| s.parse().unwrap()).collect();
    let predicted: Vec<f64> = column(&table, "predicted_spread_hz").iter().map(|s| s.parse().unwrap()).collect();
    assert!(spreads.windows(2).all(|w| w[1] < w[0]), "{spreads:?}");
    for (s, q) in spreads.iter().zip(&predicted) {
        assert!((s - q).abs() < 0.05 * q, "{s} vs {q}");
    }
    for c in &cubes {
        let stem = Path::new(c).file_stem().unwrap();
        assert!(out.join(stem).join("analysis.csv").exists());
    }
}

#[test]
fn zero_propellers_give_a_static_cube() {
    let dir = TempDir::new().unwrap();
    let mut cfg = RunConfig::default();
    cfg.scenario.n_propellers = 0;
    cfg.acquisition.n_symbols = 2048;
    cfg.output_dir = p(&dir.path().join("sim")).to_string();
    let config = write_config(dir.path(), "static.toml", &cfg);
    ok(&["simulate-md", "--config", p(&config)]);
    let cube = dir.path().join("sim/cube.icb");
    let mut r = CubeReader::open(&cube).unwrap();
    let first = r.read_row().unwrap().unwrap();
    let mut rows = 1;
    while let Some(row) = r.read_row().unwrap() {
        let dev = row.iter().zip(&first).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(dev < 0.2, "row {rows} differs by {dev}");
        rows += 1;
    }
    assert_eq!(rows, 2048);
    let out = dir.path().join("proc");
    ok(&["process-md", "--out", p(&out), p(&cube)]);
    let a = out.join("analysis.csv");
    assert_eq!(column(&a, "resolved"), ["false"]);
    assert_eq!(column(&a, "n_lines"), ["1"]);
    let line: f64 = column(&out.join("lines.csv"), "freq_hz")[0].parse().unwrap();
    assert!(line.abs() < 1.0);
}

fn vna_config(dir: &Path, name: &str, edit: impl FnOnce(&mut RunConfig)) -> PathBuf {
    let mut cfg = RunConfig {
        kind: ScenarioKind::VnaSweep,
        ..RunConfig::default()
    };
    edit(&mut cfg);
    write_config(dir, name, &cfg)
}

#[test]
fn vna_grid_and_background_only_run() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("vna");
    ok(&["simulate-vna", "--out", p(&out)]);
    for f in ["dut_bg.csv", "bg.csv", "system_response.csv"] {
        assert_stamped(&out.join(f));
    }
    let dut = read_sweep(&out.join("dut_bg.csv")).unwrap();
    assert_eq!((dut.freqs_hz.len(), dut.angles_deg.len()), (1601, 35));
    assert_eq!((dut.freqs_hz[0], dut.freqs_hz[1600]), (2e9, 18e9));
    assert_eq!((dut.angles_deg[0], dut.angles_deg[34]), (10.0, 180.0));
    assert_eq!(csv_rows(&out.join("bg.csv")).len(), 1601 * 35 * 4);

    let cfg = vna_config(dir.path(), "empty.toml", |c| {
        c.vna.target = TargetPreset::None;
        c.vna.clutter = ClutterPreset::None;
        c.noise.sigma = 0.0;
    });
    let empty = dir.path().join("empty");
    ok(&["simulate-vna", "--config", p(&cfg), "--out", p(&empty)]);
    let bg = read_sweep(&empty.join("bg.csv")).unwrap();
    let dut = read_sweep(&empty.join("dut_bg.csv")).unwrap();
    assert!(bg.data.iter().chain(&dut.data).all(|v| v.norm() == 0.0));
    let out = run(&["process-refl", "--out", p(&dir.path().join("m")), p(&empty.join("dut_bg.csv")), p(&empty.join("bg.csv"))]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn vna_files_superpose() {
    let dir = TempDir::new().unwrap();
    let a = ScattererConfig {
        position_m: [0.02, 0.0, 0.01],
        ..ScattererConfig::default()
    };
    let b = ScattererConfig {
        position_m: [-0.05, 0.03, 0.0],
        hh: [0.3, 0.1],
        hv: [0.05, 0.0],
        vh: [0.05, 0.0],
        ..ScattererConfig::default()
    };
    let mut paths = Vec::new();
    for (name, set) in [("a", vec![a.clone()]), ("b", vec![b.clone()]), ("ab", vec![a, b])] {
        let cfg = vna_config(dir.path(), &format!("{name}.toml"), |c| {
            c.vna.target = TargetPreset::Custom;
            c.vna.clutter = ClutterPreset::None;
            c.vna.scatterers = set;
            c.vna.n_freqs = 201;
            c.noise.sigma = 0.0;
        });
        let out = dir.path().join(name);
        ok(&["simulate-vna", "--config", p(&cfg), "--out", p(&out)]);
        paths.push(read_sweep(&out.join("dut_bg.csv")).unwrap());
    }
    let scale = paths[2].data.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for i in 0..paths[2].data.len() {
        let sum = paths[0].data[i] + paths[1].data[i];
        assert!((paths[2].data[i] - sum).norm() <= 1e-12 * scale, "sample {i}");
    }
}

#[test]
fn identity_system_passthrough_and_normalization() {
    let dir = TempDir::new().unwrap();
    let cfg = vna_config(dir.path(), "ident.toml", |c| {
        c.vna.system_response = SystemPreset::Identity;
        c.noise.sigma = 0.0;
    });
    let sim = dir.path().join("sim");
    ok(&["simulate-vna", "--config", p(&cfg), "--out", p(&sim)]);
    let (with, without) = (dir.path().join("with"), dir.path().join("without"));
    let (d, b, s) = (sim.join("dut_bg.csv"), sim.join("bg.csv"), sim.join("system_response.csv"));
    ok(&["process-refl", "--config", p(&cfg), "--out", p(&with), p(&d), p(&b), p(&s)]);
    ok(&["process-refl", "--config", p(&cfg), "--out", p(&without), p(&d), p(&b)]);
    for f in ["reflectivity_map.csv", "reflectivity_map_display.csv"] {
        assert_stamped(&with.join(f));
        assert!(fs::read(with.join(f)).unwrap() == fs::read(without.join(f)).unwrap(), "{f} differs");
    }

    let full: Vec<f64> = column(&with.join("reflectivity_map.csv"), "level_db").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(full.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 0.0);
    let freqs: Vec<f64> = column(&with.join("reflectivity_map_display.csv"), "freq_hz").iter().map(|s| s.parse().unwrap()).collect();
    assert!(freqs.iter().all(|&f| (2e9..=10e9).contains(&f)));
    let disp: Vec<f64> = column(&with.join("reflectivity_map_display.csv"), "level_db").iter().map(|s| s.parse().unwrap()).collect();
    assert!(disp.iter().all(|&v| v <= 0.0));
}

#[test]
fn process_refl_rejects_mismatched_system_grid() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["simulate-vna", "--out", p(&a)]);
    let cfg = vna_config(dir.path(), "coarse.toml", |c| c.vna.n_freqs = 801);
    ok(&["simulate-vna", "--config", p(&cfg), "--out", p(&b)]);
    let out = run(&[
        "process-refl",
        "--out",
        p(&dir.path().join("m")),
        p(&a.join("dut_bg.csv")),
        p(&a.join("bg.csv")),
        p(&b.join("system_response.csv")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verify_prints_passing_report() {
    let out = run(&["verify"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("summary: 10/10 passed"), "{text}");
}
