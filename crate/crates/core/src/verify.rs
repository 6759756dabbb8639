//! Invariant suite behind `phaseaug verify`.
//!
//! Each check measures one quantity, compares it with a fixed bound and
//! reports both. All randomness derives from `PolicyConfig::seed`, so a run is
//! reproducible; the bounds are loose enough that the verdict does not depend
//! on the seed.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grad::{
    phaseaug_adjoint, squared_error_gradient, time_shift_ddelta, TangentSignal, FD_STEP_DELTA,
    FD_STEP_SIGNAL,
};
use crate::metrics::{mel_mae, mstft_distance, MelConfig, MultiResConfig};
use crate::phase::{phaseaug, rotate_spectrogram, time_shift, PhaseVector};
use crate::policy::{Policy, PolicyConfig, RngState};
use crate::signal::Signal;
use crate::stft::{istft_samples, stft, stft_samples, Spectrogram};
use crate::synth;

const SAMPLE_RATE: u32 = 22050;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Below(f64),
    AtMost(f64),
    Range(f64, f64),
}

impl Bound {
    pub fn admits(&self, v: f64) -> bool {
        match *self {
            Bound::Below(b) => v < b,
            Bound::AtMost(b) => v <= b,
            Bound::Range(lo, hi) => (lo..=hi).contains(&v),
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Below(b) => write!(f, "<{b:e}"),
            Bound::AtMost(b) => write!(f, "<={b}"),
            Bound::Range(lo, hi) => write!(f, "[{lo},{hi}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub measured: f64,
    pub bound: Bound,
    pub passed: bool,
}

impl CheckOutcome {
    pub fn new(name: &'static str, measured: f64, bound: Bound) -> Self {
        Self {
            name,
            measured,
            bound,
            passed: bound.admits(measured),
        }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check={} measured={:.6e} bound={} status={}",
            self.name,
            self.measured,
            self.bound,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

/// Relative L2 distance `||a - b|| / ||b||`.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn uniform(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn signal(x: Vec<f64>) -> Signal {
    Signal::new(x, SAMPLE_RATE).expect("finite test signal")
}

/// Samples `[n_fft, len - n_fft)`, away from the reflect-padded edges.
fn interior(x: &[f64], n_fft: usize) -> &[f64] {
    &x[n_fft..x.len() - n_fft]
}

/// `x[n - delta]` for integer `delta`, zero outside the signal.
pub fn array_shift(x: &[f64], delta: i64) -> Vec<f64> {
    (0..x.len() as i64)
        .map(|n| {
            let src = n - delta;
            if src >= 0 && (src as usize) < x.len() {
                x[src as usize]
            } else {
                0.0
            }
        })
        .collect()
}

/// Relative Frobenius drift of STFT magnitudes over frames `[4, M - 4)`.
pub fn interior_magnitude_drift(a: &Spectrogram, b: &Spectrogram) -> f64 {
    let k = a.n_bins();
    let (lo, hi) = (4 * k, (a.n_frames() - 4) * k);
    let (mut num, mut den) = (0.0, 0.0);
    for (p, q) in a.bins()[lo..hi].iter().zip(&b.bins()[lo..hi]) {
        num += (p.norm() - q.norm()).powi(2);
        den += p.norm_sqr();
    }
    (num / den).sqrt()
}

fn rng_for(cfg: &PolicyConfig, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// STFT round trip on 100 random signals of 4096..=65536 samples.
pub fn check_round_trip(cfg: &PolicyConfig) -> Result<CheckOutcome> {
    let mut rng = rng_for(cfg, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let len = rng.random_range(4096..=65536);
        let x = uniform(&mut rng, len);
        let y = istft_samples(&stft_samples(&x, cfg.stft)?)?;
        worst = worst.max(max_abs_diff(&x, &y));
    }
    Ok(CheckOutcome::new(
        "stft.round_trip",
        worst,
        Bound::Below(1e-6),
    ))
}

/// Spectral magnitudes before and after rotation, 50 random pairs.
pub fn check_rotation_magnitude(cfg: &PolicyConfig) -> Result<CheckOutcome> {
    let mut rng = rng_for(cfg, 2);
    let stft_cfg = cfg.stft;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let x = uniform(&mut rng, 4 * stft_cfg.n_fft());
        let spec = stft(&signal(x), stft_cfg)?;
        let mut angles: Vec<f64> = (0..stft_cfg.n_bins())
            .map(|_| rng.random_range(-10.0..10.0))
            .collect();
        angles[0] = 0.0;
        let rotated = rotate_spectrogram(&spec, &PhaseVector::new(angles, stft_cfg.n_fft())?)?;
        for (a, b) in spec.bins().iter().zip(rotated.bins()) {
            let scale = a.norm().max(f64::MIN_POSITIVE);
            worst = worst.max((a.norm() - b.norm()).abs() / scale);
        }
    }
    Ok(CheckOutcome::new(
        "rotation.magnitude",
        worst,
        Bound::Below(1e-12),
    ))
}

/// Interior-frame magnitude drift after a full phaseaug with policy draws.
pub fn check_magnitude_drift(policy: &Policy) -> Result<CheckOutcome> {
    let cfg = policy.config();
    let mut rng = RngState::new(cfg.seed).substream(3);
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let x = test_signal(cfg, i, 16 * cfg.stft.n_fft());
        let draw = policy.sample_phase_vector(&mut rng);
        let y = phaseaug(&x, &draw.phi, cfg.stft)?;
        worst = worst.max(interior_magnitude_drift(
            &stft(&x, cfg.stft)?,
            &stft(&y, cfg.stft)?,
        ));
    }
    Ok(CheckOutcome::new(
        "phaseaug.magnitude_drift",
        worst,
        Bound::Below(5e-2),
    ))
}

fn test_signal(cfg: &PolicyConfig, i: u64, len: usize) -> Signal {
    let seed = cfg.seed.wrapping_add(i);
    if i.is_multiple_of(2) {
        synth::utterance(len, SAMPLE_RATE, seed)
    } else {
        signal(synth::band_limited(len, 0.25, seed))
    }
}

/// Integer shifts against the array-shift oracle, interior samples.
pub fn check_integer_shift(cfg: &PolicyConfig) -> Result<CheckOutcome> {
    let n = cfg.stft.n_fft();
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let x = synth::band_limited(8 * n, 0.25, cfg.seed.wrapping_add(1000 + i));
        let s = signal(x.clone());
        for delta in [-2i64, -1, 1, 2] {
            let y = time_shift(&s, delta as f64, cfg.stft)?;
            let oracle = array_shift(&x, delta);
            worst = worst.max(relative_l2(interior(y.samples(), n), interior(&oracle, n)));
        }
    }
    Ok(CheckOutcome::new(
        "shift.integer",
        worst,
        Bound::Below(5e-2),
    ))
}

/// Two half-sample shifts against one unit shift.
pub fn check_shift_composition(cfg: &PolicyConfig) -> Result<CheckOutcome> {
    let n = cfg.stft.n_fft();
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let s = signal(synth::band_limited(
            8 * n,
            0.25,
            cfg.seed.wrapping_add(2000 + i),
        ));
        let twice = time_shift(&time_shift(&s, 0.5, cfg.stft)?, 0.5, cfg.stft)?;
        let once = time_shift(&s, 1.0, cfg.stft)?;
        worst = worst.max(relative_l2(
            interior(twice.samples(), n),
            interior(once.samples(), n),
        ));
    }
    Ok(CheckOutcome::new(
        "shift.composition",
        worst,
        Bound::Below(5e-2),
    ))
}

pub fn check_kernel_power(policy: &Policy) -> CheckOutcome {
    CheckOutcome::new(
        "filter.sum_of_squares",
        policy.kernel().sum_of_squares(),
        Bound::Range(0.085, 0.110),
    )
}

/// Pooled variance of `mu_l - delta` over `draws` policy draws.
pub fn noise_variance(policy: &Policy, rng: &mut RngState, draws: usize) -> f64 {
    let (mut acc, mut count) = (0.0, 0usize);
    for _ in 0..draws {
        let d = policy.sample_phase_vector(rng);
        acc += d.mu_l.iter().map(|m| (m - d.delta).powi(2)).sum::<f64>();
        count += d.mu_l.len();
    }
    acc / count as f64
}

/// Filtered-field variance at the configured sigma2 (expected 0.58 +- 0.05)
/// and at sigma2 = 5.2 (expected 0.50 +- 0.05), 4000 draws each.
pub fn check_field_variance(policy: &Policy) -> Result<[CheckOutcome; 2]> {
    let cfg = policy.config();
    let draws = 4000;
    let at_cfg = noise_variance(policy, &mut RngState::new(cfg.seed).substream(4), draws);
    let low = Policy::new(PolicyConfig {
        sigma2: 5.2,
        ..*cfg
    })?;
    let at_low = noise_variance(&low, &mut RngState::new(cfg.seed).substream(5), draws);
    Ok([
        CheckOutcome::new("filter.field_variance", at_cfg, Bound::Range(0.53, 0.63)),
        CheckOutcome::new(
            "filter.field_variance_sigma2_5.2",
            at_low,
            Bound::Range(0.45, 0.55),
        ),
    ])
}

/// Dot-product test of the adjoint, 100 probes.
pub fn check_adjoint(policy: &Policy) -> Result<CheckOutcome> {
    let cfg = policy.config();
    let mut rng = rng_for(cfg, 6);
    let mut prng = RngState::new(cfg.seed).substream(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let len = rng.random_range(2 * cfg.stft.n_fft()..=6 * cfg.stft.n_fft());
        let phi = policy.sample_phase_vector(&mut prng).phi;
        let (x, g) = (uniform(&mut rng, len), uniform(&mut rng, len));
        let ax = phaseaug(&signal(x.clone()), &phi, cfg.stft)?;
        let ag = phaseaug_adjoint(&TangentSignal::new(g.clone())?, &phi, cfg.stft)?;
        let err = (dot(ax.samples(), &g) - dot(&x, ag.samples())).abs()
            / (dot(&x, &x).sqrt() * dot(&g, &g).sqrt());
        worst = worst.max(err);
    }
    Ok(CheckOutcome::new(
        "grad.adjoint_dot",
        worst,
        Bound::Below(1e-10),
    ))
}

/// Analytic shift derivative against central differences, 20 signals.
pub fn check_shift_derivative(cfg: &PolicyConfig) -> Result<CheckOutcome> {
    let mut rng = rng_for(cfg, 7);
    let h = FD_STEP_DELTA;
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let s = signal(synth::band_limited(
            6 * cfg.stft.n_fft(),
            0.25,
            cfg.seed.wrapping_add(3000 + i),
        ));
        let delta = rng.random_range(-2.0..2.0);
        let analytic = time_shift_ddelta(&s, delta, cfg.stft)?;
        let plus = time_shift(&s, delta + h, cfg.stft)?;
        let minus = time_shift(&s, delta - h, cfg.stft)?;
        let fd: Vec<f64> = plus
            .samples()
            .iter()
            .zip(minus.samples())
            .map(|(p, m)| (p - m) / (2.0 * h))
            .collect();
        worst = worst.max(relative_l2(analytic.samples(), &fd));
    }
    Ok(CheckOutcome::new(
        "grad.shift_derivative_fd",
        worst,
        Bound::Below(1e-4),
    ))
}

/// Gradient of `0.5 ||phaseaug(x) - t||^2` against central differences on
/// 20 random coordinates.
///
/// The loss difference is formed as `0.5 sum (y+ - y-)(y+ + y- - 2t)`, which
/// equals `L(x + h e_i) - L(x - h e_i)` exactly but avoids cancelling two
/// large sums.
pub fn check_loss_gradient(policy: &Policy) -> Result<CheckOutcome> {
    let cfg = policy.config();
    let mut rng = rng_for(cfg, 8);
    let phi = policy
        .sample_phase_vector(&mut RngState::new(cfg.seed).substream(8))
        .phi;
    let len = 4 * cfg.stft.n_fft();
    let x = uniform(&mut rng, len);
    let target = uniform(&mut rng, len);
    let grad = squared_error_gradient(&signal(x.clone()), &target, &phi, cfg.stft)?;
    let h = FD_STEP_SIGNAL;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let i = rng.random_range(0..len);
        let mut xp = x.clone();
        xp[i] += h;
        let mut xm = x.clone();
        xm[i] -= h;
        let yp = phaseaug(&signal(xp), &phi, cfg.stft)?;
        let ym = phaseaug(&signal(xm), &phi, cfg.stft)?;
        let diff: f64 = yp
            .samples()
            .iter()
            .zip(ym.samples())
            .zip(&target)
            .map(|((p, m), t)| (p - m) * (p + m - 2.0 * t))
            .sum::<f64>()
            * 0.5;
        let fd = diff / (2.0 * h);
        let an = grad.samples()[i];
        worst = worst.max((fd - an).abs() / an.abs().max(1e-6));
    }
    Ok(CheckOutcome::new(
        "grad.loss_gradient_fd",
        worst,
        Bound::Below(1e-5),
    ))
}

pub fn check_dc_zero(policy: &Policy) -> CheckOutcome {
    let mut rng = RngState::new(policy.config().seed).substream(9);
    let nonzero = (0..10_000)
        .filter(|_| policy.sample_phase_vector(&mut rng).phi.angles()[0] != 0.0)
        .count();
    CheckOutcome::new("policy.dc_zero", nonzero as f64, Bound::AtMost(0.0))
}

/// Two runs from the same seed must agree bit for bit.
pub fn check_determinism(policy: &Policy) -> Result<CheckOutcome> {
    let cfg = policy.config();
    let x = synth::utterance(4 * cfg.stft.n_fft(), SAMPLE_RATE, cfg.seed);
    let a = policy.augment(&x, &mut policy.rng())?;
    let b = policy.augment(&x, &mut policy.rng())?;
    let mismatches = a
        .samples()
        .iter()
        .zip(b.samples())
        .filter(|(p, q)| p.to_bits() != q.to_bits())
        .count();
    Ok(CheckOutcome::new(
        "policy.determinism",
        mismatches as f64,
        Bound::AtMost(0.0),
    ))
}

/// Dropping the last batch element or replacing another must leave the
/// remaining outputs untouched.
pub fn check_batch_independence(policy: &Policy) -> Result<CheckOutcome> {
    let cfg = policy.config();
    let n = cfg.stft.n_fft();
    let xs: Vec<Signal> = (0..3)
        .map(|i| synth::utterance(3 * n, SAMPLE_RATE, cfg.seed.wrapping_add(i)))
        .collect();
    let rng = policy.rng();
    let full = policy.augment_batch(&xs, &rng)?;
    let truncated = policy.augment_batch(&xs[..2], &rng)?;
    let mut replaced = xs.clone();
    replaced[0] = synth::utterance(3 * n, SAMPLE_RATE, cfg.seed.wrapping_add(99));
    let replaced = policy.augment_batch(&replaced, &rng)?;
    let keyed: Vec<(u64, Signal)> = xs
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, x)| (i as u64, x))
        .collect();
    let keyed_dropped = policy.augment_keyed(&keyed[1..], &rng)?;

    let mut changed = 0;
    changed += (full[0] != truncated[0]) as usize + (full[1] != truncated[1]) as usize;
    changed += (full[1] != replaced[1]) as usize + (full[2] != replaced[2]) as usize;
    changed += (full[1] != keyed_dropped[0].signal) as usize
        + (full[2] != keyed_dropped[1].signal) as usize;
    Ok(CheckOutcome::new(
        "policy.batch_independence",
        changed as f64,
        Bound::AtMost(0.0),
    ))
}

/// `||aug|| / ||x||` deviation from 1, worst over 20 signals.
pub fn check_energy(policy: &Policy) -> Result<CheckOutcome> {
    let cfg = policy.config();
    let mut rng = RngState::new(cfg.seed).substream(10);
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let x = test_signal(cfg, 100 + i, 8 * cfg.stft.n_fft());
        let y = policy.augment(&x, &mut rng)?;
        let ratio = (dot(y.samples(), y.samples()) / dot(x.samples(), x.samples())).sqrt();
        worst = worst.max((ratio - 1.0).abs());
    }
    Ok(CheckOutcome::new(
        "policy.energy_ratio_deviation",
        worst,
        Bound::AtMost(0.02),
    ))
}

/// Leakage on 12 synthetic 1.5 s utterances: mel MAE ratio against a
/// 64-sample advance, and M-STFT ratio against equal-RMS white noise.
pub fn check_leakage(policy: &Policy) -> Result<[CheckOutcome; 2]> {
    let cfg = policy.config();
    let mel = MelConfig::for_sample_rate(SAMPLE_RATE);
    let mr = MultiResConfig::default();
    let mut rng = RngState::new(cfg.seed).substream(11);
    let (mut mel_worst, mut mstft_worst): (f64, f64) = (0.0, 0.0);
    for i in 0..12u64 {
        let len = SAMPLE_RATE as usize * 3 / 2;
        let x = synth::utterance(len, SAMPLE_RATE, cfg.seed.wrapping_add(4000 + i));
        let y = policy.augment(&x, &mut rng)?;
        let advanced = signal(array_shift(x.samples(), -64));
        let noise = signal(synth::white_noise(
            len,
            synth::rms(x.samples()),
            cfg.seed.wrapping_add(i),
        ));
        mel_worst = mel_worst.max(mel_mae(&x, &y, &mel)? / mel_mae(&x, &advanced, &mel)?);
        mstft_worst =
            mstft_worst.max(mstft_distance(&x, &y, &mr)? / mstft_distance(&x, &noise, &mr)?);
    }
    Ok([
        CheckOutcome::new("leakage.mel_mae_vs_shift64", mel_worst, Bound::Below(1.0)),
        CheckOutcome::new("leakage.mstft_vs_noise", mstft_worst, Bound::Below(0.2)),
    ])
}

/// Runs every check. Only configuration errors abort; a failing measurement
/// is reported through [`CheckOutcome::passed`].
pub fn run_all(cfg: &PolicyConfig) -> Result<Vec<CheckOutcome>> {
    let policy = Policy::new(*cfg)?;
    let mut out = vec![
        check_round_trip(cfg)?,
        check_rotation_magnitude(cfg)?,
        check_magnitude_drift(&policy)?,
        check_integer_shift(cfg)?,
        check_shift_composition(cfg)?,
        check_kernel_power(&policy),
    ];
    out.extend(check_field_variance(&policy)?);
    out.push(check_adjoint(&policy)?);
    out.push(check_shift_derivative(cfg)?);
    out.push(check_loss_gradient(&policy)?);
    out.push(check_dc_zero(&policy));
    out.push(check_determinism(&policy)?);
    out.push(check_batch_independence(&policy)?);
    out.push(check_energy(&policy)?);
    out.extend(check_leakage(&policy)?);
    Ok(out)
}
