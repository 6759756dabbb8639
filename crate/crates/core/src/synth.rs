//! Deterministic synthetic signals for checks and examples.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::signal::Signal;

/// Sum of 12 sinusoids with random frequencies in `[0.002, max_freq]`
/// cycles/sample, random phases and amplitudes, scaled to peak 0.5.
pub fn band_limited(len: usize, max_freq: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let partials: Vec<(f64, f64, f64)> = (0..12)
        .map(|_| {
            (
                rng.random_range(0.002..max_freq),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.2..1.0),
            )
        })
        .collect();
    let mut x: Vec<f64> = (0..len)
        .map(|n| {
            partials
                .iter()
                .map(|&(f, p, a)| a * (2.0 * PI * f * n as f64 + p).sin())
                .sum()
        })
        .collect();
    normalize_peak(&mut x, 0.5);
    x
}

/// Speech-like test utterance: voiced syllables with a gliding pitch and
/// decaying harmonics, short noise bursts between them, and brief pauses.
pub fn utterance(len: usize, sample_rate: u32, seed: u64) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = sample_rate as f64;
    let nyquist = sr / 2.0;
    let mut x = vec![0.0; len];
    let mut pos = rng.random_range(0..(sample_rate as usize / 20).max(1));
    while pos < len {
        let syllable = rng.random_range(0.08..0.25) * sr;
        let end = ((pos as f64 + syllable) as usize).min(len);
        let f0_start = rng.random_range(95.0..230.0);
        let f0_end = f0_start * rng.random_range(0.8..1.25);
        let formant = rng.random_range(400.0..2500.0);
        let mut phase = 0.0;
        for (i, v) in x[pos..end].iter_mut().enumerate() {
            let t = i as f64 / (end - pos) as f64;
            let f0 = f0_start + (f0_end - f0_start) * t;
            phase += 2.0 * PI * f0 / sr;
            let env = (PI * t).sin().powi(2);
            let mut s = 0.0;
            let mut h = 1.0;
            while h * f0 < nyquist * 0.9 && h <= 40.0 {
                let f = h * f0;
                let gain = 1.0 / h + 0.8 * (-((f - formant) / 300.0).powi(2)).exp();
                s += gain * (h * phase).sin();
                h += 1.0;
            }
            *v += env * s;
        }
        pos = end;
        if pos >= len {
            break;
        }
        // Unvoiced burst.
        let burst = (rng.random_range(0.02..0.06) * sr) as usize;
        let burst_end = (pos + burst).min(len);
        for (i, v) in x[pos..burst_end].iter_mut().enumerate() {
            let t = i as f64 / (burst_end - pos).max(1) as f64;
            let n: f64 = StandardNormal.sample(&mut rng);
            *v += 0.3 * (PI * t).sin() * n;
        }
        pos = burst_end + (rng.random_range(0.0..0.05) * sr) as usize;
    }
    normalize_peak(&mut x, 0.6);
    Signal::new(x, sample_rate).expect("finite synthesis")
}

/// Gaussian white noise with the given RMS.
pub fn white_noise(len: usize, rms: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
    let cur = self::rms(&x);
    if cur > 0.0 {
        x.iter_mut().for_each(|v| *v *= rms / cur);
    }
    x
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn normalize_peak(x: &mut [f64], peak: f64) {
    let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max > 0.0 {
        x.iter_mut().for_each(|v| *v *= peak / max);
    }
}
