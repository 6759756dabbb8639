//! Centered Hann STFT and its overlap-add inverse.
//!
//! Framing follows the usual "center" convention: the signal is reflect-padded
//! by `n_fft / 2` on both sides and frame `m` starts at padded index
//! `m * hop`. The inverse applies no synthesis window; each overlap-added
//! sample is divided by the sum of the analysis windows covering it, which is
//! the constant 2 in the interior for `n_fft = 1024, hop = 256`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::signal::{check_finite, Signal};

/// Envelope values below this are treated as uncovered.
pub const ENVELOPE_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    n_fft: usize,
    hop: usize,
}

impl StftConfig {
    pub fn new(n_fft: usize, hop: usize) -> Result<Self> {
        if n_fft < 2 || !n_fft.is_multiple_of(2) {
            return Err(Error::InvalidFftSize(n_fft));
        }
        if hop == 0 || hop > n_fft {
            return Err(Error::InvalidHop { hop, n_fft });
        }
        Ok(Self { n_fft, hop })
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    /// `n_fft / 2 + 1`.
    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Frame count for a signal of `len` samples: `len / hop + 1`.
    pub fn n_frames(&self, len: usize) -> usize {
        len / self.hop + 1
    }
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            n_fft: 1024,
            hop: 256,
        }
    }
}

/// `w[n] = (1 - cos(2 pi n / N)) / 2` for `0 <= n < N`.
pub fn hann_window(n_fft: usize) -> Result<Vec<f64>> {
    if n_fft < 2 || !n_fft.is_multiple_of(2) {
        return Err(Error::InvalidFftSize(n_fft));
    }
    let n = n_fft as f64;
    Ok((0..n_fft)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n).cos()))
        .collect())
}

/// One-sided STFT matrix, `n_frames x (n_fft / 2 + 1)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    bins: Vec<Complex64>,
    n_frames: usize,
    cfg: StftConfig,
    original_length: usize,
}

impl Spectrogram {
    /// Builds a spectrogram from raw bins. `bins.len()` must equal
    /// `n_frames * cfg.n_bins()` and every entry must be finite.
    pub fn from_parts(
        bins: Vec<Complex64>,
        n_frames: usize,
        cfg: StftConfig,
        original_length: usize,
    ) -> Result<Self> {
        let expected = n_frames * cfg.n_bins();
        if bins.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: bins.len(),
            });
        }
        if let Some(i) = bins
            .iter()
            .position(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            bins,
            n_frames,
            cfg,
            original_length,
        })
    }

    pub fn zeros(cfg: StftConfig, original_length: usize) -> Self {
        let n_frames = cfg.n_frames(original_length);
        Self {
            bins: vec![Complex64::new(0.0, 0.0); n_frames * cfg.n_bins()],
            n_frames,
            cfg,
            original_length,
        }
    }

    pub fn config(&self) -> StftConfig {
        self.cfg
    }

    pub fn n_fft(&self) -> usize {
        self.cfg.n_fft
    }

    pub fn hop(&self) -> usize {
        self.cfg.hop
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.cfg.n_bins()
    }

    pub fn original_length(&self) -> usize {
        self.original_length
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub(crate) fn bins_mut(&mut self) -> &mut [Complex64] {
        &mut self.bins
    }

    pub fn row(&self, m: usize) -> &[Complex64] {
        let k = self.n_bins();
        &self.bins[m * k..(m + 1) * k]
    }

    pub fn get(&self, m: usize, k: usize) -> Complex64 {
        self.bins[m * self.n_bins() + k]
    }

    /// `|X[m, k]|` for every entry, row-major.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.bins.iter().map(|c| c.norm()).collect()
    }

    /// Two-sided spectrum of frame `m`, `X[N - k] = conj(X[k])`.
    pub fn full_row(&self, m: usize) -> Vec<Complex64> {
        let mut full = vec![Complex64::new(0.0, 0.0); self.n_fft()];
        hermitian_extend(self.row(m), &mut full);
        full
    }
}

fn hermitian_extend(one_sided: &[Complex64], full: &mut [Complex64]) {
    let n = full.len();
    full[..one_sided.len()].copy_from_slice(one_sided);
    for k in 1..n / 2 {
        full[n - k] = one_sided[k].conj();
    }
}

/// Analysis window together with the per-sample window sum over all frames
/// of a padded signal.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowEnvelope {
    pub taps: Vec<f64>,
    /// Indexed in padded coordinates, length `original_length + n_fft`.
    pub overlap_sum: Vec<f64>,
}

impl WindowEnvelope {
    pub fn new(cfg: StftConfig, original_length: usize) -> Self {
        let taps = hann_window(cfg.n_fft).expect("StftConfig guarantees even n_fft");
        let mut overlap_sum = vec![0.0; original_length + cfg.n_fft];
        for m in 0..cfg.n_frames(original_length) {
            let start = m * cfg.hop;
            for (acc, w) in overlap_sum[start..start + cfg.n_fft].iter_mut().zip(&taps) {
                *acc += w;
            }
        }
        Self { taps, overlap_sum }
    }

    /// Overlap sum at each output sample, or an error if any of them is
    /// below [`ENVELOPE_FLOOR`].
    pub(crate) fn trimmed(&self, cfg: StftConfig, original_length: usize) -> Result<&[f64]> {
        let pad = cfg.n_fft / 2;
        let env = &self.overlap_sum[pad..pad + original_length];
        match env.iter().position(|&e| e < ENVELOPE_FLOOR) {
            Some(i) => Err(Error::ZeroEnvelope(i)),
            None => Ok(env),
        }
    }
}

/// Maps padded index `p` to a source index under `numpy`-style reflect
/// padding of `pad` samples (edge sample not repeated).
pub(crate) fn reflect_index(p: usize, pad: usize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len - 1) as isize;
    let i = (p as isize - pad as isize).rem_euclid(period);
    if i < len as isize {
        i as usize
    } else {
        (period - i) as usize
    }
}

pub(crate) struct Plans {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
}

impl Plans {
    pub fn new(n_fft: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(n_fft),
            inverse: planner.plan_fft_inverse(n_fft),
        }
    }
}

pub fn stft(x: &Signal, cfg: StftConfig) -> Result<Spectrogram> {
    stft_samples(x.samples(), cfg)
}

pub(crate) fn stft_samples(x: &[f64], cfg: StftConfig) -> Result<Spectrogram> {
    if x.is_empty() {
        return Err(Error::EmptySignal);
    }
    check_finite(x)?;
    let len = x.len();
    let n = cfg.n_fft;
    let pad = n / 2;
    let n_bins = cfg.n_bins();
    let window = hann_window(n)?;
    let padded: Vec<f64> = (0..len + n)
        .map(|p| x[reflect_index(p, pad, len)])
        .collect();

    let plans = Plans::new(n);
    let n_frames = cfg.n_frames(len);
    let mut bins = Vec::with_capacity(n_frames * n_bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..n_frames {
        let frame = &padded[m * cfg.hop..m * cfg.hop + n];
        for ((b, &s), &w) in buf.iter_mut().zip(frame).zip(&window) {
            *b = Complex64::new(s * w, 0.0);
        }
        plans.forward.process(&mut buf);
        bins.extend_from_slice(&buf[..n_bins]);
    }
    Ok(Spectrogram {
        bins,
        n_frames,
        cfg,
        original_length: len,
    })
}

pub fn istft(spec: &Spectrogram, sample_rate: u32) -> Result<Signal> {
    Signal::new(istft_samples(spec)?, sample_rate)
}

pub(crate) fn istft_samples(spec: &Spectrogram) -> Result<Vec<f64>> {
    let cfg = spec.cfg;
    let len = spec.original_length;
    if len == 0 {
        return Err(Error::EmptySignal);
    }
    if spec.n_frames != cfg.n_frames(len) {
        return Err(Error::LengthMismatch {
            expected: cfg.n_frames(len),
            actual: spec.n_frames,
        });
    }
    let n = cfg.n_fft;
    let pad = n / 2;
    let envelope = WindowEnvelope::new(cfg, len);
    let env = envelope.trimmed(cfg, len)?;

    let plans = Plans::new(n);
    let scale = 1.0 / n as f64;
    let mut acc = vec![0.0; len + n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..spec.n_frames {
        hermitian_extend(spec.row(m), &mut buf);
        plans.inverse.process(&mut buf);
        let start = m * cfg.hop;
        for (a, b) in acc[start..start + n].iter_mut().zip(&buf) {
            *a += b.re * scale;
        }
    }
    Ok(acc[pad..pad + len]
        .iter()
        .zip(env)
        .map(|(a, e)| a / e)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    // Direct O(N^2) DFT of one windowed frame.
    fn dft(frame: &[f64]) -> Vec<Complex64> {
        let n = frame.len();
        (0..n)
            .map(|k| {
                frame
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let ang = -2.0 * PI * (i * k % n) as f64 / n as f64;
                        Complex64::new(v * ang.cos(), v * ang.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn hann_values() {
        let w = hann_window(1024).unwrap();
        assert_eq!(w[0], 0.0);
        assert!((w[512] - 1.0).abs() < 1e-15);
        assert!((w[256] - 0.5).abs() < 1e-15);
        for i in 1..1024 {
            assert!((w[i] - w[1024 - i]).abs() < 1e-15);
        }
        assert!(w.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn hann_rejects_odd_and_zero() {
        assert_eq!(hann_window(0), Err(Error::InvalidFftSize(0)));
        assert_eq!(hann_window(7), Err(Error::InvalidFftSize(7)));
    }

    #[test]
    fn config_validation() {
        assert!(StftConfig::new(1023, 256).is_err());
        assert!(StftConfig::new(1024, 0).is_err());
        assert!(StftConfig::new(1024, 1025).is_err());
        let d = StftConfig::default();
        assert_eq!((d.n_fft(), d.hop()), (1024, 256));
    }

    #[test]
    fn interior_overlap_sum_is_two() {
        let cfg = StftConfig::default();
        let env = WindowEnvelope::new(cfg, 8192);
        for p in 1024..8192 {
            assert!((env.overlap_sum[p] - 2.0).abs() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn frame_count() {
        let x = Signal::new(vec![0.1; 4096], 16000).unwrap();
        let s = stft(&x, StftConfig::default()).unwrap();
        assert_eq!(s.n_frames(), 17);
        assert_eq!(s.n_bins(), 513);
        assert_eq!(s.original_length(), 4096);
    }

    #[test]
    fn errors_on_empty_and_nonfinite() {
        let cfg = StftConfig::default();
        assert_eq!(stft_samples(&[], cfg), Err(Error::EmptySignal));
        assert_eq!(
            stft_samples(&[0.0, f64::NAN], cfg),
            Err(Error::NonFinite(1))
        );
    }

    #[test]
    fn constant_signal_hits_only_dc() {
        let cfg = StftConfig::default();
        let c = 0.3;
        let s = stft_samples(&vec![c; 4096], cfg).unwrap();
        let wsum: f64 = hann_window(1024).unwrap().iter().sum();
        for m in 0..s.n_frames() {
            assert!((s.get(m, 0).norm() - c * wsum).abs() < 1e-9);
            // Hann main lobe spans bins 0 and 1.
            for k in 2..s.n_bins() {
                assert!(s.get(m, k).norm() < 1e-9, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn tone_peaks_at_bin_16_and_matches_direct_dft() {
        let cfg = StftConfig::default();
        let x: Vec<f64> = (0..4096)
            .map(|n| (2.0 * PI * 16.0 * n as f64 / 1024.0).cos())
            .collect();
        let s = stft_samples(&x, cfg).unwrap();
        let w = hann_window(1024).unwrap();
        for m in 2..s.n_frames() - 2 {
            let row = s.row(m);
            let peak = (0..row.len())
                .max_by(|&a, &b| row[a].norm().partial_cmp(&row[b].norm()).unwrap())
                .unwrap();
            assert_eq!(peak, 16);
        }
        // Interior frame against the DFT definition.
        let m = 8;
        let frame: Vec<f64> = (0..1024).map(|i| x[m * 256 + i - 512] * w[i]).collect();
        let reference = dft(&frame);
        for k in 0..513 {
            assert!((reference[k] - s.get(m, k)).norm() < 1e-8, "k={k}");
        }
    }

    #[test]
    fn round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = StftConfig::default();
        for &len in &[2048usize, 4096, 5000, 12345] {
            let x = random_signal(&mut rng, len);
            let y = istft_samples(&stft_samples(&x, cfg).unwrap()).unwrap();
            assert_eq!(y.len(), len);
            let err = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "len={len} err={err}");
        }
    }

    #[test]
    fn round_trip_short_and_odd_configs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(n_fft, hop, len) in &[
            (16, 4, 3),
            (16, 8, 37),
            (64, 16, 1),
            (8, 2, 2),
            (32, 16, 100),
        ] {
            let cfg = StftConfig::new(n_fft, hop).unwrap();
            let x = random_signal(&mut rng, len);
            let y = istft_samples(&stft_samples(&x, cfg).unwrap()).unwrap();
            let err = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-9, "{n_fft}/{hop}/{len}: {err}");
        }
    }

    #[test]
    fn sparse_hop_reports_uncovered_samples() {
        let cfg = StftConfig::new(16, 16).unwrap();
        let spec = stft_samples(&[0.5; 40], cfg).unwrap();
        assert!(matches!(istft_samples(&spec), Err(Error::ZeroEnvelope(_))));
    }

    #[test]
    fn zero_spectrogram_gives_zero_signal() {
        let cfg = StftConfig::default();
        let y = istft_samples(&Spectrogram::zeros(cfg, 3000)).unwrap();
        assert_eq!(y.len(), 3000);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn istft_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = StftConfig::new(64, 16).unwrap();
        let len = 300;
        let nf = cfg.n_frames(len);
        let mut rand_spec = || {
            let bins = (0..nf * cfg.n_bins())
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            Spectrogram::from_parts(bins, nf, cfg, len).unwrap()
        };
        let (x, y) = (rand_spec(), rand_spec());
        let (a, b) = (0.7, -1.3);
        let combo: Vec<Complex64> = x
            .bins()
            .iter()
            .zip(y.bins())
            .map(|(p, q)| p * a + q * b)
            .collect();
        let combo = Spectrogram::from_parts(combo, nf, cfg, len).unwrap();
        let lhs = istft_samples(&combo).unwrap();
        let (ix, iy) = (istft_samples(&x).unwrap(), istft_samples(&y).unwrap());
        for i in 0..len {
            assert!((lhs[i] - (a * ix[i] + b * iy[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn parseval_on_interior_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = StftConfig::default();
        let x = random_signal(&mut rng, 8192);
        let s = stft_samples(&x, cfg).unwrap();
        let w = hann_window(1024).unwrap();
        let m = 10;
        let time: f64 = (0..1024)
            .map(|i| (x[m * 256 + i - 512] * w[i]).powi(2))
            .sum();
        let freq: f64 = s.full_row(m).iter().map(|c| c.norm_sqr()).sum::<f64>() / 1024.0;
        assert!(((time - freq) / time).abs() < 1e-9);
    }

    #[test]
    fn from_parts_validates_shape() {
        let cfg = StftConfig::new(8, 2).unwrap();
        assert!(Spectrogram::from_parts(vec![Complex64::new(0.0, 0.0); 9], 2, cfg, 3).is_err());
        let bad = vec![Complex64::new(f64::NAN, 0.0); 10];
        assert!(matches!(
            Spectrogram::from_parts(bad, 2, cfg, 3),
            Err(Error::NonFinite(0))
        ));
    }

    #[test]
    fn reflect_padding_matches_numpy() {
        // np.pad([0,1,2,3], 3, mode="reflect") == [3,2,1,0,1,2,3,2,1,0]
        let got: Vec<usize> = (0..10).map(|p| reflect_index(p, 3, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
    }
}
