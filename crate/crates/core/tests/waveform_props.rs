use icas_sig::dsp::{crest_factor, median};
use icas_sig::waveform::*;
use icas_sig::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[test]
fn newman_beats_random_phases() {
    let cfg = OfdmConfig::default();
    let r = build_reference(&cfg).unwrap();
    let newman = symbol_crest_factor(&r);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut random = Vec::new();
    for _ in 0..100 {
        let mut spec = vec![Complex64::new(0.0, 0.0); cfg.n_carriers];
        for k in cfg.active_range() {
            spec[k] = Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI));
        }
        random.push(crest_factor(&spectrum_to_time(&spec)));
    }
    let med = median(&random);
    assert!(newman < med, "newman {newman} vs random median {med}");
}

#[test]
fn crest_factor_is_reproducible() {
    let r = build_reference(&OfdmConfig::default()).unwrap();
    assert_eq!(symbol_crest_factor(&r).to_bits(), symbol_crest_factor(&r).to_bits());
}

proptest! {
    #[test]
    fn round_trip_any_spectrum(vals in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 8..300)) {
        let spec: Vec<Complex64> = vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        let back = time_to_spectrum(&spectrum_to_time(&spec));
        let scale = spec.iter().map(|v| v.norm()).fold(1e-300, f64::max);
        for (a, b) in spec.iter().zip(&back) {
            prop_assert!((a - b).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn accepted_configs_are_consistent(n in 16usize..4000, frac in 0.1..1.0f64, stride in 0usize..20) {
        let n_active = ((n as f64 * frac) as usize).max(1);
        let cfg = OfdmConfig {
            n_carriers: n,
            n_active,
            bandwidth_hz: n as f64 * 125e3,
            symbol_duration_s: 8e-6,
            pilot_stride: stride,
            ..OfdmConfig::default()
        };
        if let Ok(r) = build_reference(&cfg) {
            prop_assert!((cfg.carrier_spacing_hz() * cfg.symbol_duration_s - 1.0).abs() < 1e-9);
            let active = r.active_mask().iter().filter(|&&a| a).count();
            prop_assert_eq!(active, n_active);
            let lo = cfg.first_active();
            let hi = n - lo - n_active;
            prop_assert!(hi == lo || hi == lo + 1);
            prop_assert_eq!(r.data_carriers().len() + r.pilot_carriers().len(), n_active);
            for (k, v) in r.spectrum().iter().enumerate() {
                prop_assert_eq!(v.norm() > 0.0, r.active_mask()[k]);
            }
        }
    }
}
