use icas_sig::geometry::*;
use icas_sig::pipeline::{acquire_slow_time, MdScenario};
use icas_sig::scene::*;
use icas_sig::simulate::*;
use icas_sig::waveform::*;
use icas_sig::Complex64;
use std::f64::consts::PI;

fn close(a: &[Complex64], b: &[Complex64], rel: f64) -> bool {
    let scale = a.iter().chain(b).map(|v| v.norm()).fold(1e-300, f64::max);
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() <= rel * scale)
}

fn pt(x: f64, y: f64, z: f64, a: f64) -> PointScatterer {
    PointScatterer::fixed(Vec3::new(x, y, z), PolarimetricCoeff::isotropic(a))
}

#[test]
fn superposition_of_scenes() {
    let g = BistaticGeometry::symmetric(Vec3::ZERO, 1.1, 5.0, -Vec3::X, Vec3::Z).unwrap();
    let a = Scene::single_rotor(Vec3::ZERO, 0.0, 1.0);
    let b = Scene::new().with_static(pt(0.3, 0.1, 0.0, 2.0)).with_background(pt(1.0, 2.0, 1.0, 5.0));
    let mut both = a.clone();
    both.static_scatterers.extend(b.static_scatterers.clone());
    both.background_scatterers.extend(b.background_scatterers.clone());
    let freqs = linear_grid(3.6e9, 3.8e9, 1280);
    for t in [0.0, 1.3e-3] {
        let ha = channel_response(&a, &g, &freqs, t, Polarization::HH).unwrap();
        let hb = channel_response(&b, &g, &freqs, t, Polarization::HH).unwrap();
        let hab = channel_response(&both, &g, &freqs, t, Polarization::HH).unwrap();
        let sum: Vec<Complex64> = ha.iter().zip(&hb).map(|(x, y)| x + y).collect();
        assert!(close(&hab, &sum, 1e-12));
    }
}

#[test]
fn reciprocity_under_antenna_swap() {
    let g = BistaticGeometry::new(Vec3::new(-4.0, 1.0, 0.5), Vec3::new(2.0, 3.0, -1.0), Vec3::ZERO).unwrap();
    let scene = Scene::single_rotor(Vec3::ZERO, 1.0, 1.0).with_static(pt(0.2, -0.1, 0.05, 0.5));
    assert!(scene.is_reciprocal());
    let freqs = linear_grid(2e9, 18e9, 401);
    let h1 = channel_response(&scene, &g, &freqs, 2e-3, Polarization::VV).unwrap();
    let h2 = channel_response(&scene, &g.swapped(), &freqs, 2e-3, Polarization::VV).unwrap();
    for (a, b) in h1.iter().zip(&h2) {
        assert!((a.norm() - b.norm()).abs() <= 1e-12 * a.norm().max(1e-300));
    }
}

#[test]
fn static_scene_gives_identical_symbols() {
    let r = build_reference(&OfdmConfig::default()).unwrap();
    let g = BistaticGeometry::symmetric(Vec3::ZERO, 0.5, 3.0, -Vec3::X, Vec3::Z).unwrap();
    let scene = Scene::new().with_static(pt(0.0, 0.0, 0.0, 1.0));
    let cube = simulate_slow_time(&scene, &g, &r, 5, &NoiseSpec::NONE).unwrap();
    for m in 1..5 {
        assert_eq!(cube.symbol(m), cube.symbol(0));
    }
}

#[test]
fn strided_run_equals_rows_of_full_run() {
    let r = build_reference(&OfdmConfig::default()).unwrap();
    let g = BistaticGeometry::symmetric(Vec3::ZERO, 0.5, 3.0, -Vec3::X, Vec3::Z).unwrap();
    let scene = Scene::single_rotor(Vec3::ZERO, 1.0, 1.0);
    let noise = NoiseSpec::new(0.01, 3).unwrap();
    let full = simulate_slow_time(&scene, &g, &r, 24, &noise).unwrap();
    let strided = simulate_slow_time_strided(&scene, &g, &r, 3, 0, 8, &noise).unwrap();
    for m in 0..3 {
        assert_eq!(strided.symbol(m), full.symbol(8 * m));
    }
}

#[test]
fn seeded_runs_are_bit_identical() {
    let r = build_reference(&OfdmConfig::default()).unwrap();
    let g = BistaticGeometry::symmetric(Vec3::ZERO, 0.5, 3.0, -Vec3::X, Vec3::Z).unwrap();
    let scene = Scene::single_rotor(Vec3::ZERO, 1.0, 1.0);
    let noise = NoiseSpec::new(0.1, 11).unwrap();
    let a = simulate_slow_time(&scene, &g, &r, 6, &noise).unwrap();
    let b = simulate_slow_time(&scene, &g, &r, 6, &noise).unwrap();
    assert_eq!(a.data, b.data);
    let c = simulate_slow_time(&scene, &g, &r, 6, &NoiseSpec::new(0.1, 12).unwrap()).unwrap();
    assert_ne!(a.data, c.data);
}

#[test]
fn radial_mover_rotates_at_point_doppler() {
    let cfg = OfdmConfig::default();
    let r = build_reference(&cfg).unwrap();
    let g = BistaticGeometry::new(Vec3::new(30.0, 0.0, 0.0), Vec3::new(30.0, 0.0, 0.0), Vec3::ZERO).unwrap();
    let v = Vec3::new(4.0, 0.0, 0.0);
    let scene = Scene::new().with_static(PointScatterer {
        position: Vec3::ZERO,
        velocity: v,
        coeff: PolarimetricCoeff::isotropic(1.0),
    });
    let p = acquire_slow_time(&scene, &g, &r, 400, 8, &NoiseSpec::NONE, None).unwrap();
    let mean_step: Complex64 = p.samples.windows(2).map(|w| w[1] * w[0].conj()).sum();
    let measured = mean_step.arg() / (2.0 * PI) * p.sample_rate_hz;
    let want = point_doppler(&g, v, cfg.wavelength_m()).unwrap();
    assert!(want > 0.0, "approaching target must have positive Doppler");
    assert!((measured - want).abs() < 5e-3 * want.abs(), "{measured} vs {want}");
}

#[test]
fn slow_time_periodic_over_blade_period() {
    let cfg = OfdmConfig::default();
    let r = build_reference(&cfg).unwrap();
    let sc = MdScenario::default();
    // 31.25 kHz slow time: one blade period is 625 samples
    let p = acquire_slow_time(&sc.scene().unwrap(), &sc.geometry().unwrap(), &r, 1300, 4, &NoiseSpec::NONE, None).unwrap();
    let period = 625;
    assert!(close(&p.samples[..p.len() - period], &p.samples[period..], 1e-9));
}

#[test]
fn vna_record_structure() {
    let freqs = default_vna_freqs();
    let angles = default_vna_angles();
    let geoms = flyover_sweep(&angles, Vec3::ZERO, 3.0).unwrap();
    let ident = vec![Complex64::new(1.0, 0.0); freqs.len()];
    let target = Scene::new().with_static(pt(0.0, 0.0, 0.0, 1.0));
    let sweep = simulate_vna_sweep(&target, &geoms, &angles, &freqs, &ident, &NoiseSpec::NONE).unwrap();
    assert_eq!(sweep.dut_bg.data.len(), 1601 * 35 * 4);
    assert!(sweep.bg.data.iter().all(|v| v.norm() == 0.0));
    assert!(sweep.dut_bg.same_grid(&sweep.bg));

    let noise = NoiseSpec::new(0.01, 5).unwrap();
    let noisy = simulate_vna_sweep(&Scene::new(), &geoms[..2], &angles[..2], &freqs, &ident, &noise).unwrap();
    let power = noisy.bg.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / noisy.bg.data.len() as f64;
    assert!((power / 1e-4 - 1.0).abs() < 0.05, "noise power {power}");
}

#[test]
fn dut_minus_bg_is_target_only() {
    let freqs = linear_grid(2e9, 18e9, 801);
    let angles = [10.0, 90.0, 180.0];
    let geoms = flyover_sweep(&angles, Vec3::ZERO, 3.0).unwrap();
    let sys = default_system_response(&freqs);
    let scene = Scene::new()
        .with_static(pt(0.0, 0.0, 0.0, 1.0))
        .with_static(pt(0.05, 0.0, 0.02, 0.3))
        .with_background(pt(1.0, 2.0, 2.0, 30.0));
    let sweep = simulate_vna_sweep(&scene, &geoms, &angles, &freqs, &sys, &NoiseSpec::NONE).unwrap();
    let target = simulate_vna_sweep(&scene.target_only(), &geoms, &angles, &freqs, &sys, &NoiseSpec::NONE).unwrap();
    let diff: Vec<Complex64> = sweep.dut_bg.data.iter().zip(&sweep.bg.data).map(|(a, b)| a - b).collect();
    assert!(close(&diff, &target.dut_bg.data, 1e-12));
}
