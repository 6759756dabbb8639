//! Regression thresholds for time shifts, set at three times the worst error
//! measured on 100 band-limited signals.

use phaseaug::synth::band_limited;
use phaseaug::verify::{array_shift, relative_l2};
use phaseaug::{phaseaug, phi_ref, time_shift, Signal, StftConfig};

const INTEGER_LIMIT: f64 = 1e-5;
const COMPOSITION_LIMIT: f64 = 3.5e-4;

fn interior(x: &[f64], n_fft: usize) -> &[f64] {
    &x[n_fft..x.len() - n_fft]
}

#[test]
fn integer_shifts_match_array_shift() {
    let cfg = StftConfig::default();
    let n = cfg.n_fft();
    for seed in 0..25 {
        let x = Signal::new(band_limited(8192, 0.1 + 0.015 * seed as f64, seed), 22050).unwrap();
        for delta in [-2i64, -1, 1, 2] {
            let y = time_shift(&x, delta as f64, cfg).unwrap();
            let want = array_shift(x.samples(), delta);
            let err = relative_l2(interior(y.samples(), n), interior(&want, n));
            assert!(err < INTEGER_LIMIT, "seed {seed} delta {delta}: {err}");
        }
    }
}

#[test]
fn half_steps_compose() {
    let cfg = StftConfig::default();
    let n = cfg.n_fft();
    for seed in 0..25 {
        let x = Signal::new(band_limited(8192, 0.49, 100 + seed), 22050).unwrap();
        let half = time_shift(&x, 0.5, cfg).unwrap();
        let twice = time_shift(&half, 0.5, cfg).unwrap();
        let once = time_shift(&x, 1.0, cfg).unwrap();
        let err = relative_l2(interior(twice.samples(), n), interior(once.samples(), n));
        assert!(err < COMPOSITION_LIMIT, "seed {seed}: {err}");
    }
}

#[test]
fn negative_reference_rotation_delays_by_one() {
    let cfg = StftConfig::default();
    let x = Signal::new(band_limited(6000, 0.3, 77), 22050).unwrap();
    let phi = phi_ref(cfg.n_fft()).unwrap().scaled(-1.0);
    let y = phaseaug(&x, &phi, cfg).unwrap();
    let want = array_shift(x.samples(), 1);
    assert!(relative_l2(interior(y.samples(), 1024), interior(&want, 1024)) < INTEGER_LIMIT);
}

#[test]
fn bound_is_enforced() {
    let cfg = StftConfig::default();
    let x = Signal::new(band_limited(4096, 0.2, 1), 22050).unwrap();
    assert!(time_shift(&x, 128.0, cfg).is_ok());
    assert!(time_shift(&x, -128.5, cfg).is_err());
    assert!(time_shift(&x, f64::NAN, cfg).is_err());
}
