//! Fidelity metrics between an original and an augmented signal.

use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::stft::{stft_samples, StftConfig};

/// Power floor for M-STFT magnitudes: `|X| = sqrt(max(|X|^2, 1e-7))`.
pub const MSTFT_POWER_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub stft: StftConfig,
    /// Lower clamp applied before the natural log.
    pub floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            sample_rate: 22050,
            n_mels: 80,
            f_min: 0.0,
            f_max: 8000.0,
            stft: StftConfig::default(),
            floor: 1e-5,
        }
    }
}

impl MelConfig {
    /// Defaults at `sample_rate`, with `f_max` capped at Nyquist.
    pub fn for_sample_rate(sample_rate: u32) -> Self {
        let d = Self::default();
        Self {
            sample_rate,
            f_max: d.f_max.min(sample_rate as f64 / 2.0),
            ..d
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate as f64 / 2.0;
        if self.n_mels == 0 {
            return Err(Error::InvalidMetric("n_mels must be >= 1".into()));
        }
        if !(self.f_min >= 0.0 && self.f_min < self.f_max && self.f_max <= nyquist) {
            return Err(Error::InvalidMetric(format!(
                "need 0 <= f_min < f_max <= {nyquist}, got f_min={} f_max={}",
                self.f_min, self.f_max
            )));
        }
        if self.floor.is_nan() || self.floor <= 0.0 {
            return Err(Error::InvalidMetric(format!(
                "floor must be positive, got {}",
                self.floor
            )));
        }
        Ok(())
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters on the HTK mel scale, each scaled to unit area in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_mels x n_bins`, row-major.
    weights: Vec<f64>,
    n_mels: usize,
    n_bins: usize,
    /// Band edges in Hz, `n_mels + 2` points.
    edges: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(cfg: &MelConfig) -> Result<Self> {
        cfg.validate()?;
        let n_bins = cfg.stft.n_bins();
        let bin_hz = cfg.sample_rate as f64 / cfg.stft.n_fft() as f64;
        let (lo, hi) = (hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max));
        let edges: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
            .collect();
        let mut weights = vec![0.0; cfg.n_mels * n_bins];
        for b in 0..cfg.n_mels {
            let (left, center, right) = (edges[b], edges[b + 1], edges[b + 2]);
            let norm = 2.0 / (right - left);
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let rise = (f - left) / (center - left);
                let fall = (right - f) / (right - center);
                weights[b * n_bins + k] = rise.min(fall).max(0.0) * norm;
            }
        }
        Ok(Self {
            weights,
            n_mels: cfg.n_mels,
            n_bins,
            edges,
        })
    }

    pub fn band(&self, b: usize) -> &[f64] {
        &self.weights[b * self.n_bins..(b + 1) * self.n_bins]
    }

    /// `(left, center, right)` in Hz for band `b`.
    pub fn band_edges(&self, b: usize) -> (f64, f64, f64) {
        (self.edges[b], self.edges[b + 1], self.edges[b + 2])
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }
}

/// Log-mel features, `n_frames x n_mels`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub data: Vec<f64>,
    pub n_frames: usize,
    pub n_mels: usize,
}

impl MelSpectrogram {
    pub fn frame(&self, m: usize) -> &[f64] {
        &self.data[m * self.n_mels..(m + 1) * self.n_mels]
    }
}

pub fn mel_spectrogram(x: &Signal, cfg: &MelConfig) -> Result<MelSpectrogram> {
    let fb = MelFilterbank::new(cfg)?;
    mel_with_bank(x, cfg, &fb)
}

fn mel_with_bank(x: &Signal, cfg: &MelConfig, fb: &MelFilterbank) -> Result<MelSpectrogram> {
    if x.sample_rate() != cfg.sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: cfg.sample_rate,
            actual: x.sample_rate(),
        });
    }
    let spec = stft_samples(x.samples(), cfg.stft)?;
    let mut data = Vec::with_capacity(spec.n_frames() * fb.n_mels);
    for m in 0..spec.n_frames() {
        let mag: Vec<f64> = spec.row(m).iter().map(|c| c.norm()).collect();
        for b in 0..fb.n_mels {
            let e: f64 = fb.band(b).iter().zip(&mag).map(|(w, v)| w * v).sum();
            data.push(e.max(cfg.floor).ln());
        }
    }
    Ok(MelSpectrogram {
        data,
        n_frames: spec.n_frames(),
        n_mels: fb.n_mels,
    })
}

fn check_pair(a: &Signal, b: &Signal) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.sample_rate() != b.sample_rate() {
        return Err(Error::SampleRateMismatch {
            expected: a.sample_rate(),
            actual: b.sample_rate(),
        });
    }
    Ok(())
}

/// Mean absolute difference of the two log-mel matrices.
pub fn mel_mae(a: &Signal, b: &Signal, cfg: &MelConfig) -> Result<f64> {
    check_pair(a, b)?;
    let fb = MelFilterbank::new(cfg)?;
    let (ma, mb) = (mel_with_bank(a, cfg, &fb)?, mel_with_bank(b, cfg, &fb)?);
    let total: f64 = ma
        .data
        .iter()
        .zip(&mb.data)
        .map(|(p, q)| (p - q).abs())
        .sum();
    Ok(total / ma.data.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub n_fft: usize,
    pub hop: usize,
    pub window_length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiResConfig {
    pub resolutions: Vec<Resolution>,
}

impl Default for MultiResConfig {
    fn default() -> Self {
        let r = |n_fft, hop| Resolution {
            n_fft,
            hop,
            window_length: n_fft,
        };
        Self {
            resolutions: vec![r(512, 128), r(1024, 256), r(2048, 512)],
        }
    }
}

impl MultiResConfig {
    /// Only full-length Hann windows are supported, so `window_length` must
    /// equal `n_fft`.
    pub fn stft_configs(&self) -> Result<Vec<StftConfig>> {
        if self.resolutions.is_empty() {
            return Err(Error::InvalidMetric("no resolutions".into()));
        }
        self.resolutions
            .iter()
            .map(|r| {
                if r.window_length != r.n_fft {
                    return Err(Error::InvalidMetric(format!(
                        "window_length {} must equal n_fft {}",
                        r.window_length, r.n_fft
                    )));
                }
                StftConfig::new(r.n_fft, r.hop)
            })
            .collect()
    }
}

/// Spectral convergence and mean log-magnitude L1 for one resolution.
pub fn stft_distance_terms(a: &[f64], b: &[f64], cfg: StftConfig) -> Result<(f64, f64)> {
    let (sa, sb) = (stft_samples(a, cfg)?, stft_samples(b, cfg)?);
    let (mut diff, mut norm, mut log_l1) = (0.0, 0.0, 0.0);
    for (p, q) in sa.bins().iter().zip(sb.bins()) {
        let ma = p.norm_sqr().max(MSTFT_POWER_FLOOR).sqrt();
        let mb = q.norm_sqr().max(MSTFT_POWER_FLOOR).sqrt();
        diff += (ma - mb).powi(2);
        norm += ma * ma;
        log_l1 += (ma.ln() - mb.ln()).abs();
    }
    let sc = diff.sqrt() / norm.sqrt();
    Ok((sc, log_l1 / sa.bins().len() as f64))
}

/// Mean over resolutions of spectral convergence plus log-magnitude L1.
pub fn mstft_distance(a: &Signal, b: &Signal, cfg: &MultiResConfig) -> Result<f64> {
    check_pair(a, b)?;
    let cfgs = cfg.stft_configs()?;
    let mut total = 0.0;
    for c in &cfgs {
        let (sc, mag) = stft_distance_terms(a.samples(), b.samples(), *c)?;
        total += sc + mag;
    }
    Ok(total / cfgs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, sr: u32, len: usize, amp: f64) -> Signal {
        let x = (0..len)
            .map(|n| amp * (2.0 * PI * freq * n as f64 / sr as f64).sin())
            .collect();
        Signal::new(x, sr).unwrap()
    }

    #[test]
    fn mel_scale_round_trip() {
        for f in [0.0, 100.0, 1000.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
        assert!((hz_to_mel(1000.0) - 999.985_6).abs() < 1e-3);
    }

    #[test]
    fn silence_is_log_floor() {
        let cfg = MelConfig::default();
        let x = Signal::new(vec![0.0; 4096], 22050).unwrap();
        let m = mel_spectrogram(&x, &cfg).unwrap();
        assert_eq!(m.n_mels, 80);
        assert!(m.data.iter().all(|&v| v == 1e-5f64.ln()));
    }

    #[test]
    fn filterbank_tiles_range() {
        let cfg = MelConfig::default();
        let fb = MelFilterbank::new(&cfg).unwrap();
        for b in 0..80 {
            assert!(fb.band(b).iter().sum::<f64>() > 0.0, "band {b} empty");
        }
        let bin_hz = 22050.0 / 1024.0;
        for k in 0..513 {
            let f = k as f64 * bin_hz;
            if f > cfg.f_min && f < cfg.f_max {
                assert!((0..80).any(|b| fb.band(b)[k] > 0.0), "bin {k} uncovered");
            }
        }
    }

    #[test]
    fn tone_lands_in_its_band() {
        let cfg = MelConfig::default();
        let fb = MelFilterbank::new(&cfg).unwrap();
        let m = mel_spectrogram(&tone(1000.0, 22050, 22050, 0.5), &cfg).unwrap();
        let frame = m.frame(m.n_frames / 2);
        let best = (0..80)
            .max_by(|&a, &b| frame[a].partial_cmp(&frame[b]).unwrap())
            .unwrap();
        let (left, _, right) = fb.band_edges(best);
        assert!(
            left < 1000.0 && 1000.0 < right,
            "band {best}: {left}..{right}"
        );
    }

    #[test]
    fn mae_basics() {
        let cfg = MelConfig::default();
        let a = tone(440.0, 22050, 8000, 0.5);
        let b = tone(660.0, 22050, 8000, 0.3);
        assert_eq!(mel_mae(&a, &a, &cfg).unwrap(), 0.0);
        let (ab, ba) = (
            mel_mae(&a, &b, &cfg).unwrap(),
            mel_mae(&b, &a, &cfg).unwrap(),
        );
        assert!(ab > 0.0);
        assert_eq!(ab, ba);
        let other_rate = tone(440.0, 16000, 8000, 0.5);
        assert!(matches!(
            mel_mae(&a, &other_rate, &cfg),
            Err(Error::SampleRateMismatch { .. })
        ));
        assert!(matches!(
            mel_mae(&a, &tone(440.0, 22050, 10, 0.5), &cfg),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn mel_config_validation() {
        assert!(MelConfig {
            f_max: 12000.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(MelConfig {
            n_mels: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert_eq!(MelConfig::for_sample_rate(8000).f_max, 4000.0);
    }

    #[test]
    fn mstft_basics() {
        let cfg = MultiResConfig::default();
        let a = tone(440.0, 22050, 8000, 0.5);
        assert_eq!(mstft_distance(&a, &a, &cfg).unwrap(), 0.0);
        let half = Signal::new(a.samples().iter().map(|v| 0.5 * v).collect(), 22050).unwrap();
        assert!(mstft_distance(&a, &half, &cfg).unwrap() > 0.0);
        let bad = MultiResConfig {
            resolutions: vec![Resolution {
                n_fft: 512,
                hop: 128,
                window_length: 256,
            }],
        };
        assert!(mstft_distance(&a, &a, &bad).is_err());
    }
}
