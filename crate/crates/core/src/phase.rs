//! The phase-rotation operator and fractional time shift built on it.
//!
//! `phaseaug(x, phi)` computes `istft(stft(x) * diag(exp(j phi)))`. Because a
//! delay of `delta` samples multiplies bin `k` by `exp(-j 2 pi delta k / N)`,
//! rotating by `-delta * phi_ref` approximates `x[n - delta]` for any real
//! `delta` that is small next to `N`. Positive `delta` delays.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::stft::{istft_samples, stft_samples, Spectrogram, StftConfig};

/// Per-bin rotation angles in radians, `n_fft / 2 + 1` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    angles: Vec<f64>,
    n_fft: usize,
}

impl PhaseVector {
    /// Checks length and finiteness. A nonzero DC angle is representable but
    /// rejected by [`phaseaug`].
    pub fn new(angles: Vec<f64>, n_fft: usize) -> Result<Self> {
        if n_fft < 2 || !n_fft.is_multiple_of(2) {
            return Err(Error::InvalidFftSize(n_fft));
        }
        if angles.len() != n_fft / 2 + 1 {
            return Err(Error::LengthMismatch {
                expected: n_fft / 2 + 1,
                actual: angles.len(),
            });
        }
        if let Some(i) = angles.iter().position(|a| !a.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { angles, n_fft })
    }

    pub fn zeros(n_fft: usize) -> Result<Self> {
        Self::new(vec![0.0; n_fft / 2 + 1], n_fft)
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            angles: self.angles.iter().map(|a| a * factor).collect(),
            n_fft: self.n_fft,
        }
    }

    /// Elementwise sum; both vectors must share `n_fft`.
    pub fn sum(&self, other: &PhaseVector) -> Result<Self> {
        check_fft(self.n_fft, other.n_fft)?;
        Ok(Self {
            angles: self
                .angles
                .iter()
                .zip(&other.angles)
                .map(|(a, b)| a + b)
                .collect(),
            n_fft: self.n_fft,
        })
    }
}

fn check_fft(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::FftSizeMismatch { expected, actual });
    }
    Ok(())
}

/// `2 pi / N * [0, 1, ..., N/2]`: rotating by `delta` times this vector
/// moves every bin by `delta` samples.
pub fn phi_ref(n_fft: usize) -> Result<PhaseVector> {
    if n_fft < 2 || !n_fft.is_multiple_of(2) {
        return Err(Error::InvalidFftSize(n_fft));
    }
    let step = 2.0 * PI / n_fft as f64;
    PhaseVector::new((0..=n_fft / 2).map(|k| step * k as f64).collect(), n_fft)
}

/// Multiplies column `k` by `exp(j phi[k])`, applied as a 2x2 rotation on
/// the (re, im) pair. Columns with a zero angle are copied untouched.
pub fn rotate_spectrogram(spec: &Spectrogram, phi: &PhaseVector) -> Result<Spectrogram> {
    check_fft(spec.n_fft(), phi.n_fft)?;
    let mut out = spec.clone();
    rotate_in_place(&mut out, phi.angles());
    Ok(out)
}

pub(crate) fn rotate_in_place(spec: &mut Spectrogram, angles: &[f64]) {
    let n_bins = spec.n_bins();
    let rot: Vec<(f64, f64)> = angles.iter().map(|a| (a.cos(), a.sin())).collect();
    for row in spec.bins_mut().chunks_exact_mut(n_bins) {
        for ((c, &(cos, sin)), &a) in row.iter_mut().zip(&rot).zip(angles) {
            if a == 0.0 {
                continue;
            }
            let (re, im) = (c.re, c.im);
            c.re = cos * re - sin * im;
            c.im = sin * re + cos * im;
        }
    }
}

/// `istft(rotate_spectrogram(stft(x), phi))`, same length as `x`.
pub fn phaseaug(x: &Signal, phi: &PhaseVector, cfg: StftConfig) -> Result<Signal> {
    x.with_samples(phaseaug_samples(x.samples(), phi, cfg)?)
}

pub(crate) fn phaseaug_samples(x: &[f64], phi: &PhaseVector, cfg: StftConfig) -> Result<Vec<f64>> {
    check_fft(cfg.n_fft(), phi.n_fft)?;
    if phi.angles[0] != 0.0 {
        return Err(Error::NonZeroDcPhase(phi.angles[0]));
    }
    let mut spec = stft_samples(x, cfg)?;
    rotate_in_place(&mut spec, phi.angles());
    istft_samples(&spec)
}

/// Largest accepted `|delta|`: `n_fft / 8`.
pub fn max_shift(cfg: StftConfig) -> f64 {
    cfg.n_fft() as f64 / 8.0
}

pub(crate) fn check_shift(delta: f64, cfg: StftConfig) -> Result<()> {
    let bound = max_shift(cfg);
    if !delta.is_finite() || delta.abs() > bound {
        return Err(Error::ShiftOutOfBounds { delta, bound });
    }
    Ok(())
}

/// Delays `x` by `delta` samples (fractional allowed) via
/// `phaseaug(x, -delta * phi_ref)`.
pub fn time_shift(x: &Signal, delta: f64, cfg: StftConfig) -> Result<Signal> {
    check_shift(delta, cfg)?;
    let phi = phi_ref(cfg.n_fft())?.scaled(-delta);
    phaseaug(x, &phi, cfg)
}
