//! Hand-derived backward passes.
//!
//! For fixed `phi`, `A(x) = phaseaug(x, phi)` is real-linear in `x` and
//! factors as `A = T R S`: `S` is the STFT (reflect pad, frame, window, FFT),
//! `R` the per-bin rotation and `T` the iSTFT (Hermitian inverse,
//! overlap-add, envelope division, trim). The adjoint runs the stages
//! backwards: `A* = S* R^T T*`, where `R^T` is rotation by `-phi`.
//!
//! Spectrograms are treated as real vectors of (re, im) pairs with the inner
//! product `sum Re(X conj(Y))`.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::phase::{check_shift, phaseaug_samples, phi_ref, rotate_in_place, PhaseVector};
use crate::signal::{check_finite, Signal};
use crate::stft::{
    hann_window, istft_samples, reflect_index, stft_samples, Plans, Spectrogram, StftConfig,
    WindowEnvelope,
};

/// Central-difference step for gradient checks against `x`.
pub const FD_STEP_SIGNAL: f64 = 1e-5;
/// Central-difference step for checks against the shift `delta`.
pub const FD_STEP_DELTA: f64 = 1e-4;

/// A perturbation direction or gradient with the same length as its primal signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentSignal {
    samples: Vec<f64>,
}

impl TangentSignal {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        check_finite(&samples)?;
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// `S*`: spectrogram cotangent back to a signal of `original_length` samples.
pub fn stft_adjoint(cot: &Spectrogram) -> Result<Vec<f64>> {
    let cfg = cot.config();
    let len = cot.original_length();
    let n = cfg.n_fft();
    let window = hann_window(n)?;
    let plans = Plans::new(n);
    let mut padded = vec![0.0; len + n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..cot.n_frames() {
        // Re(sum_{k <= N/2} G[k] e^{+j 2 pi n k / N}): one-sided, not Hermitian.
        buf.fill(Complex64::new(0.0, 0.0));
        buf[..cot.n_bins()].copy_from_slice(cot.row(m));
        plans.inverse.process(&mut buf);
        let start = m * cfg.hop();
        for ((p, b), w) in padded[start..start + n].iter_mut().zip(&buf).zip(&window) {
            *p += b.re * w;
        }
    }
    // Adjoint of reflect padding: fold every padded slot onto its source.
    let pad = n / 2;
    let mut out = vec![0.0; len];
    for (p, v) in padded.iter().enumerate() {
        out[reflect_index(p, pad, len)] += v;
    }
    Ok(out)
}

/// `T*`: signal cotangent to a spectrogram cotangent.
pub fn istft_adjoint(g: &[f64], cfg: StftConfig) -> Result<Spectrogram> {
    let len = g.len();
    if len == 0 {
        return Err(Error::EmptySignal);
    }
    let n = cfg.n_fft();
    let pad = n / 2;
    let envelope = WindowEnvelope::new(cfg, len);
    let env = envelope.trimmed(cfg, len)?;
    let mut scaled = vec![0.0; len + n];
    for ((s, gi), e) in scaled[pad..pad + len].iter_mut().zip(g).zip(env) {
        *s = gi / e;
    }

    let plans = Plans::new(n);
    let n_bins = cfg.n_bins();
    let n_frames = cfg.n_frames(len);
    let inv_n = 1.0 / n as f64;
    let mut bins = Vec::with_capacity(n_frames * n_bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..n_frames {
        let start = m * cfg.hop();
        for (b, &s) in buf.iter_mut().zip(&scaled[start..start + n]) {
            *b = Complex64::new(s, 0.0);
        }
        plans.forward.process(&mut buf);
        // Interior bins appear twice in the Hermitian extension.
        for (k, b) in buf[..n_bins].iter().enumerate() {
            let weight = if k == 0 || k == n / 2 {
                inv_n
            } else {
                2.0 * inv_n
            };
            bins.push(b * weight);
        }
    }
    Spectrogram::from_parts(bins, n_frames, cfg, len)
}

/// Adjoint of `x -> phaseaug(x, phi)`: `<A x, g> = <x, A* g>`.
pub fn phaseaug_adjoint(
    g: &TangentSignal,
    phi: &PhaseVector,
    cfg: StftConfig,
) -> Result<TangentSignal> {
    if phi.n_fft() != cfg.n_fft() {
        return Err(Error::FftSizeMismatch {
            expected: cfg.n_fft(),
            actual: phi.n_fft(),
        });
    }
    if phi.angles()[0] != 0.0 {
        return Err(Error::NonZeroDcPhase(phi.angles()[0]));
    }
    let mut cot = istft_adjoint(g.samples(), cfg)?;
    let back: Vec<f64> = phi.angles().iter().map(|a| -a).collect();
    rotate_in_place(&mut cot, &back);
    TangentSignal::new(stft_adjoint(&cot)?)
}

/// Gradient of `0.5 * ||phaseaug(x, phi) - target||^2` with respect to `x`.
pub fn squared_error_gradient(
    x: &Signal,
    target: &[f64],
    phi: &PhaseVector,
    cfg: StftConfig,
) -> Result<TangentSignal> {
    if target.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: target.len(),
        });
    }
    let y = phaseaug_samples(x.samples(), phi, cfg)?;
    let residual: Vec<f64> = y.iter().zip(target).map(|(a, b)| a - b).collect();
    phaseaug_adjoint(&TangentSignal::new(residual)?, phi, cfg)
}

/// `d/d delta time_shift(x, delta)`: inverse transform of
/// `X * (-j phi_ref) * exp(-j delta phi_ref)`.
pub fn time_shift_ddelta(x: &Signal, delta: f64, cfg: StftConfig) -> Result<TangentSignal> {
    check_shift(delta, cfg)?;
    let reference = phi_ref(cfg.n_fft())?;
    let mut spec = stft_samples(x.samples(), cfg)?;
    let back: Vec<f64> = reference.angles().iter().map(|r| -delta * r).collect();
    rotate_in_place(&mut spec, &back);
    let n_bins = spec.n_bins();
    for row in spec.bins_mut().chunks_exact_mut(n_bins) {
        for (c, r) in row.iter_mut().zip(reference.angles()) {
            // (a + jb)(-j r) = r b - j r a
            *c = Complex64::new(r * c.im, -r * c.re);
        }
    }
    TangentSignal::new(istft_samples(&spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::phaseaug;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn random_phase(rng: &mut ChaCha8Rng, n_fft: usize) -> PhaseVector {
        let mut a: Vec<f64> = (0..=n_fft / 2).map(|_| rng.random_range(-PI..PI)).collect();
        a[0] = 0.0;
        PhaseVector::new(a, n_fft).unwrap()
    }

    // Dense matrix of A, one column per basis vector; A^T is the oracle.
    fn dense(phi: &PhaseVector, cfg: StftConfig, len: usize) -> Vec<Vec<f64>> {
        (0..len)
            .map(|j| {
                let mut e = vec![0.0; len];
                e[j] = 1.0;
                phaseaug_samples(&e, phi, cfg).unwrap()
            })
            .collect()
    }

    #[test]
    fn adjoint_matches_dense_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for &(n_fft, hop, len) in &[(16, 4, 23), (16, 8, 40), (8, 2, 5), (32, 8, 64)] {
            let cfg = StftConfig::new(n_fft, hop).unwrap();
            let phi = random_phase(&mut rng, n_fft);
            let cols = dense(&phi, cfg, len);
            let g: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let adj = phaseaug_adjoint(&TangentSignal::new(g.clone()).unwrap(), &phi, cfg).unwrap();
            for j in 0..len {
                let expect = dot(&cols[j], &g);
                assert!(
                    (adj.samples()[j] - expect).abs() < 1e-12,
                    "{n_fft}/{hop}/{len} j={j}"
                );
            }
        }
    }

    #[test]
    fn zero_phase_adjoint_is_identity() {
        // istft(stft(x)) = x, so its adjoint is the identity too.
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let cfg = StftConfig::default();
        let g: Vec<f64> = (0..5000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let adj = phaseaug_adjoint(
            &TangentSignal::new(g.clone()).unwrap(),
            &PhaseVector::zeros(1024).unwrap(),
            cfg,
        )
        .unwrap();
        let err = g
            .iter()
            .zip(adj.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn stage_adjoints_pass_dot_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let cfg = StftConfig::new(64, 16).unwrap();
        let len = 333;
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sx = stft_samples(&x, cfg).unwrap();
        let nf = sx.n_frames();
        let gy: Vec<Complex64> = (0..nf * cfg.n_bins())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let gy = Spectrogram::from_parts(gy, nf, cfg, len).unwrap();
        let lhs: f64 = sx
            .bins()
            .iter()
            .zip(gy.bins())
            .map(|(a, b)| (a * b.conj()).re)
            .sum();
        let rhs = dot(&x, &stft_adjoint(&gy).unwrap());
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));

        let g: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let tx = istft_samples(&gy).unwrap();
        let tg = istft_adjoint(&g, cfg).unwrap();
        let lhs = dot(&tx, &g);
        let rhs: f64 = gy
            .bins()
            .iter()
            .zip(tg.bins())
            .map(|(a, b)| (a * b.conj()).re)
            .sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn adjoint_errors() {
        let cfg = StftConfig::new(64, 16).unwrap();
        let g = TangentSignal::new(vec![0.0; 100]).unwrap();
        assert!(matches!(
            phaseaug_adjoint(&g, &PhaseVector::zeros(32).unwrap(), cfg),
            Err(Error::FftSizeMismatch { .. })
        ));
        let x = Signal::new(vec![0.0; 100], 16000).unwrap();
        assert!(matches!(
            squared_error_gradient(&x, &[0.0; 10], &PhaseVector::zeros(64).unwrap(), cfg),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(time_shift_ddelta(&x, 9.0, cfg).is_err());
    }

    #[test]
    fn constant_signal_has_zero_shift_derivative() {
        let cfg = StftConfig::default();
        let x = Signal::new(vec![0.4; 6000], 16000).unwrap();
        let d = time_shift_ddelta(&x, 0.3, cfg).unwrap();
        // The Hann main lobe puts part of the DC energy into bin 1; the
        // window derivatives cancel only where the full set of frames
        // overlaps, so the first and last n_fft samples are excluded.
        assert!(d.samples()[1024..6000 - 1024]
            .iter()
            .all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn bin_centered_tone_derivative_closed_form() {
        // d/d delta cos(w (n - delta)) = w sin(w (n - delta)).
        let cfg = StftConfig::default();
        let w = 2.0 * PI * 40.0 / 1024.0;
        let amp = 0.6;
        let x: Vec<f64> = (0..8192).map(|n| amp * (w * n as f64).cos()).collect();
        let x = Signal::new(x, 16000).unwrap();
        for &delta in &[0.0, 0.4, -1.5] {
            let d = time_shift_ddelta(&x, delta, cfg).unwrap();
            for n in 1024..8192 - 1024 {
                let expect = amp * w * (w * (n as f64 - delta)).sin();
                assert!(
                    (d.samples()[n] - expect).abs() < 1e-9,
                    "delta={delta} n={n}"
                );
            }
        }
    }

    #[test]
    fn forward_uses_same_phase_as_adjoint() {
        // <A x, g> == <x, A* g> at production size.
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let cfg = StftConfig::default();
        let phi = random_phase(&mut rng, 1024);
        let x: Vec<f64> = (0..4500).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..4500).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ax = phaseaug(&Signal::new(x.clone(), 16000).unwrap(), &phi, cfg).unwrap();
        let ag = phaseaug_adjoint(&TangentSignal::new(g.clone()).unwrap(), &phi, cfg).unwrap();
        let (lhs, rhs) = (dot(ax.samples(), &g), dot(&x, ag.samples()));
        let norm = dot(&x, &x).sqrt() * dot(&g, &g).sqrt();
        assert!((lhs - rhs).abs() / norm < 1e-10);
    }
}
