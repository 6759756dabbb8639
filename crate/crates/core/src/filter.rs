//! Kaiser-windowed sinc low-pass filter for the per-bin time-shift field.
//!
//! The kernel is applied along the frequency-bin axis of the random shift
//! vector, never to audio samples. Frequencies here are in cycles per bin
//! step.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub kernel_size: usize,
    /// Cycles per sample of the filtered sequence, in (0, 0.5).
    pub cutoff: f64,
    pub transition_half_width: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            kernel_size: 128,
            cutoff: 0.05,
            transition_half_width: 0.06,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_size < 8 {
            return Err(Error::InvalidFilter(format!(
                "kernel_size must be at least 8, got {}",
                self.kernel_size
            )));
        }
        if !(self.cutoff > 0.0 && self.cutoff < 0.5) {
            return Err(Error::InvalidFilter(format!(
                "cutoff must be in (0, 0.5), got {}",
                self.cutoff
            )));
        }
        if !(self.transition_half_width > 0.0 && self.transition_half_width.is_finite()) {
            return Err(Error::InvalidFilter(format!(
                "transition_half_width must be positive, got {}",
                self.transition_half_width
            )));
        }
        Ok(())
    }

    /// Stopband attenuation in dB implied by the length and transition width.
    pub fn attenuation(&self) -> f64 {
        2.285 * (self.kernel_size - 1) as f64 * PI * (2.0 * self.transition_half_width) + 7.95
    }

    /// Kaiser shape parameter from the empirical three-branch relation.
    pub fn beta(&self) -> f64 {
        let a = self.attenuation();
        if a > 50.0 {
            0.1102 * (a - 8.7)
        } else if a >= 21.0 {
            0.5842 * (a - 21.0).powf(0.4) + 0.07886 * (a - 21.0)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterKernel {
    taps: Vec<f64>,
    spec: FilterSpec,
}

impl FilterKernel {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn spec(&self) -> FilterSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Output-to-input variance ratio for i.i.d. input.
    pub fn sum_of_squares(&self) -> f64 {
        self.taps.iter().map(|h| h * h).sum()
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn kaiser_window(len: usize, beta: f64) -> Vec<f64> {
    let denom = bessel_i0(beta);
    let half = (len - 1) as f64 / 2.0;
    (0..len)
        .map(|n| {
            let r = (n as f64 - half) / half;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Ideal low-pass at `spec.cutoff`, Kaiser windowed, scaled to unit DC gain.
/// Taps are centered at `(L - 1) / 2`, so an even length sits on half-sample
/// offsets.
pub fn design_kaiser_sinc(spec: FilterSpec) -> Result<FilterKernel> {
    spec.validate()?;
    let len = spec.kernel_size;
    let window = kaiser_window(len, spec.beta());
    let center = (len - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = window
        .iter()
        .enumerate()
        .map(|(n, w)| 2.0 * spec.cutoff * sinc(2.0 * spec.cutoff * (n as f64 - center)) * w)
        .collect();
    let total: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= total;
    }
    // Exact mirror so rounding never breaks symmetry.
    for i in 0..len / 2 {
        let avg = 0.5 * (taps[i] + taps[len - 1 - i]);
        taps[i] = avg;
        taps[len - 1 - i] = avg;
    }
    Ok(FilterKernel { taps, spec })
}

/// Valid-mode correlation: `out[i] = sum_j input[i + j] * h[j]`. The input
/// must hold exactly `n_out + L - 1` values.
pub fn filter_mu(mu_extended: &[f64], kernel: &FilterKernel) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    filter_mu_into(
        mu_extended,
        kernel,
        mu_extended.len().saturating_sub(kernel.len() - 1),
        &mut out,
    )?;
    Ok(out)
}

/// [`filter_mu`] with an explicit output length and a reusable buffer.
pub fn filter_mu_into(
    mu_extended: &[f64],
    kernel: &FilterKernel,
    n_out: usize,
    out: &mut Vec<f64>,
) -> Result<()> {
    let expected = n_out + kernel.len() - 1;
    if mu_extended.len() != expected || n_out == 0 {
        return Err(Error::LengthMismatch {
            expected,
            actual: mu_extended.len(),
        });
    }
    out.clear();
    out.extend(
        mu_extended
            .windows(kernel.len())
            .map(|w| w.iter().zip(&kernel.taps).map(|(a, b)| a * b).sum::<f64>()),
    );
    Ok(())
}
