//! Random augmentation policy.
//!
//! One draw works as follows:
//!
//! 1. `delta ~ U(-delta_max, delta_max)`
//! 2. `mu ~ N(delta, sigma2)` i.i.d. over `n_bins + L - 1` entries
//! 3. `mu_l = filter_mu(mu, kernel)`, `n_bins` entries
//! 4. `phi = mu_l * phi_ref`, with `phi[0] = 0`
//!
//! `mu_l[k]` is a time shift in samples for bin `k`; the augmented signal is
//! `phaseaug(x, phi)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::{design_kaiser_sinc, filter_mu_into, FilterKernel, FilterSpec};
use crate::phase::{phaseaug_samples, phi_ref, PhaseVector};
use crate::signal::Signal;
use crate::stft::{istft_samples, stft_samples, StftConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub delta_max: f64,
    pub sigma2: f64,
    pub probability: f64,
    pub stft: StftConfig,
    pub filter: FilterSpec,
    pub seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            delta_max: 2.0,
            sigma2: 6.0,
            probability: 1.0,
            stft: StftConfig::default(),
            filter: FilterSpec::default(),
            seed: 0,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_max >= 0.0 && self.delta_max.is_finite()) {
            return Err(Error::InvalidPolicy(format!(
                "delta_max must be finite and >= 0, got {}",
                self.delta_max
            )));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidPolicy(format!(
                "sigma2 must be finite and >= 0, got {}",
                self.sigma2
            )));
        }
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::InvalidPolicy(format!(
                "probability must be in [0, 1], got {}",
                self.probability
            )));
        }
        self.filter.validate()
    }
}

/// Seeded ChaCha20 stream. `substream(i)` derives an independent generator
/// from the original seed and `i` only, regardless of how far this one has
/// advanced.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self::keyed(seed, 0)
    }

    fn keyed(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn substream(&self, index: u64) -> Self {
        Self::keyed(self.seed, mix(self.stream, index))
    }

    pub(crate) fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }
}

// splitmix64 finalizer over (parent stream, index).
fn mix(parent: u64, index: u64) -> u64 {
    let mut z = parent
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One sampled rotation together with the quantities it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDraw {
    pub delta: f64,
    /// Filtered per-bin time shift in samples.
    pub mu_l: Vec<f64>,
    pub phi: PhaseVector,
}

/// Augmented output plus the draw, `None` when the coin flip skipped it.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub signal: Signal,
    pub draw: Option<PhaseDraw>,
}

/// A validated [`PolicyConfig`] with its filter kernel and `phi_ref`
/// precomputed.
#[derive(Debug, Clone)]
pub struct Policy {
    cfg: PolicyConfig,
    kernel: FilterKernel,
    phi_ref: PhaseVector,
}

impl Policy {
    pub fn new(cfg: PolicyConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            kernel: design_kaiser_sinc(cfg.filter)?,
            phi_ref: phi_ref(cfg.stft.n_fft())?,
            cfg,
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn kernel(&self) -> &FilterKernel {
        &self.kernel
    }

    /// Generator seeded from `config().seed`.
    pub fn rng(&self) -> RngState {
        RngState::new(self.cfg.seed)
    }

    pub fn sample_phase_vector(&self, rng: &mut RngState) -> PhaseDraw {
        let delta = if self.cfg.delta_max > 0.0 {
            rng.rng()
                .random_range(-self.cfg.delta_max..self.cfg.delta_max)
        } else {
            0.0
        };
        self.draw_around(rng, delta)
    }

    /// Steps 2-4 with `delta` pinned. Test hook only; the policy always
    /// samples `delta` itself.
    #[doc(hidden)]
    pub fn sample_with_delta(&self, rng: &mut RngState, delta: f64) -> PhaseDraw {
        self.draw_around(rng, delta)
    }

    fn draw_around(&self, rng: &mut RngState, delta: f64) -> PhaseDraw {
        let n_bins = self.cfg.stft.n_bins();
        let extended = n_bins + self.kernel.len() - 1;
        let mu: Vec<f64> = if self.cfg.sigma2 > 0.0 {
            let normal = Normal::new(delta, self.cfg.sigma2.sqrt()).expect("validated sigma2");
            normal.sample_iter(rng.rng()).take(extended).collect()
        } else {
            vec![delta; extended]
        };
        let mut mu_l = Vec::with_capacity(n_bins);
        filter_mu_into(&mu, &self.kernel, n_bins, &mut mu_l).expect("length fixed above");
        let mut angles: Vec<f64> = mu_l
            .iter()
            .zip(self.phi_ref.angles())
            .map(|(m, r)| m * r)
            .collect();
        angles[0] = 0.0;
        let phi = PhaseVector::new(angles, self.cfg.stft.n_fft()).expect("finite by construction");
        PhaseDraw { delta, mu_l, phi }
    }

    pub fn augment(&self, x: &Signal, rng: &mut RngState) -> Result<Signal> {
        Ok(self.augment_traced(x, rng)?.signal)
    }

    /// [`Policy::augment`], also returning the draw that was applied.
    ///
    /// When the coin flip skips augmentation the signal still goes through
    /// the STFT round trip, so both branches carry the same numerical noise.
    pub fn augment_traced(&self, x: &Signal, rng: &mut RngState) -> Result<Augmented> {
        let coin: f64 = rng.rng().random();
        if coin < self.cfg.probability {
            let draw = self.sample_phase_vector(rng);
            let samples = phaseaug_samples(x.samples(), &draw.phi, self.cfg.stft)?;
            Ok(Augmented {
                signal: x.with_samples(samples)?,
                draw: Some(draw),
            })
        } else {
            let samples = istft_samples(&stft_samples(x.samples(), self.cfg.stft)?)?;
            Ok(Augmented {
                signal: x.with_samples(samples)?,
                draw: None,
            })
        }
    }

    /// Applies one sampled rotation to both a real and a generated signal.
    ///
    /// This is the discriminator-input path: feature-matching losses compare
    /// discriminator activations on the two outputs, so they must see the
    /// same rotation. Call it once for the discriminator update and again
    /// (fresh draw) for the generator update. Reconstruction losses such as
    /// the mel-spectrogram L1 belong on the un-augmented pair.
    pub fn augment_pair(
        &self,
        x_real: &Signal,
        x_gen: &Signal,
        rng: &mut RngState,
    ) -> Result<(Signal, Signal)> {
        if x_real.len() != x_gen.len() {
            return Err(Error::LengthMismatch {
                expected: x_real.len(),
                actual: x_gen.len(),
            });
        }
        let draw = self.sample_phase_vector(rng);
        let real = phaseaug_samples(x_real.samples(), &draw.phi, self.cfg.stft)?;
        let gen = phaseaug_samples(x_gen.samples(), &draw.phi, self.cfg.stft)?;
        Ok((x_real.with_samples(real)?, x_gen.with_samples(gen)?))
    }

    /// Element `i` uses `rng.substream(i)`, so its output depends only on the
    /// seed, `i` and `xs[i]`. Elements are processed in parallel.
    pub fn augment_batch(&self, xs: &[Signal], rng: &RngState) -> Result<Vec<Signal>> {
        if xs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        xs.par_iter()
            .enumerate()
            .map(|(i, x)| self.augment(x, &mut rng.substream(i as u64)))
            .collect()
    }

    /// Like [`Policy::augment_batch`] but each element carries its own
    /// substream key, so adding or removing elements never changes the
    /// output of the others.
    pub fn augment_keyed(&self, items: &[(u64, Signal)], rng: &RngState) -> Result<Vec<Augmented>> {
        if items.is_empty() {
            return Err(Error::EmptyBatch);
        }
        items
            .par_iter()
            .map(|(key, x)| self.augment_traced(x, &mut rng.substream(*key)))
            .collect()
    }
}
