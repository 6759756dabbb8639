//! Phase-rotation augmentation for audio.
//!
//! The crate rotates the phase of every STFT frequency bin of a signal without
//! touching magnitudes, which gives a differentiable approximation of
//! (fractional) time shifting. On top of that operator sits a stochastic
//! policy that draws a smooth per-bin time-shift field, low-pass filtered with
//! a Kaiser-windowed sinc kernel, for use as a discriminator-side augmentation
//! when training GAN vocoders.
//!
//! Module map:
//!
//! * [`stft`]: centered Hann STFT and its overlap-add inverse.
//! * [`phase`]: the rotation operator, the reference rotation vector and
//!   fractional time shift.
//! * [`filter`]: Kaiser-windowed sinc design and valid-mode filtering of the
//!   time-shift field.
//! * [`policy`]: the random augmentation policy and its paired/batched forms.
//! * [`grad`]: hand-derived adjoints and shift derivatives.
//! * [`metrics`]: log-mel MAE and multi-resolution STFT distance.
//! * [`synth`] and [`verify`]: deterministic test signals and the invariant
//!   suite run by `phaseaug verify`.

pub mod error;
pub mod filter;
pub mod grad;
pub mod metrics;
pub mod phase;
pub mod policy;
pub mod signal;
pub mod stft;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
pub use filter::{design_kaiser_sinc, filter_mu, FilterKernel, FilterSpec};
pub use grad::{phaseaug_adjoint, time_shift_ddelta, TangentSignal};
pub use metrics::{mel_mae, mel_spectrogram, mstft_distance, MelConfig, MultiResConfig};
pub use phase::{phaseaug, phi_ref, rotate_spectrogram, time_shift, PhaseVector};
pub use policy::{Augmented, PhaseDraw, Policy, PolicyConfig, RngState};
pub use signal::Signal;
pub use stft::{hann_window, istft, stft, Spectrogram, StftConfig, WindowEnvelope};
