//! Mono WAV in and out. Only 16-bit integer PCM and 32-bit float are
//! accepted; anything else, including multichannel audio, is an error.

use std::path::Path;

use anyhow::{bail, Context};
use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use phaseaug::Signal;

use crate::config::SampleEncoding;

#[derive(Debug, Clone, PartialEq)]
pub struct WavFile {
    pub signal: Signal,
    pub encoding: SampleEncoding,
}

pub fn read(path: &Path) -> anyhow::Result<WavFile> {
    let reader =
        WavReader::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        bail!(
            "{}: {} channels, only mono is supported",
            path.display(),
            spec.channels
        );
    }
    let (samples, encoding) = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => {
            let s: Vec<f64> = reader
                .into_samples::<i16>()
                .map(|v| v.map(|v| v as f64 / 32768.0))
                .collect::<Result<_, _>>()
                .with_context(|| format!("corrupt sample data in {}", path.display()))?;
            (s, SampleEncoding::Pcm16)
        }
        (SampleFormat::Float, 32) => {
            let s: Vec<f64> = reader
                .into_samples::<f32>()
                .map(|v| v.map(f64::from))
                .collect::<Result<_, _>>()
                .with_context(|| format!("corrupt sample data in {}", path.display()))?;
            (s, SampleEncoding::Float32)
        }
        (fmt, bits) => bail!(
            "{}: unsupported encoding {bits}-bit {fmt:?} (expected 16-bit PCM or 32-bit float)",
            path.display()
        ),
    };
    let signal = Signal::new(samples, spec.sample_rate)
        .with_context(|| format!("invalid samples in {}", path.display()))?;
    Ok(WavFile { signal, encoding })
}

/// Round half away from zero, then clip to the i16 range.
pub fn quantize_pcm16(v: f64) -> i16 {
    (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn write(path: &Path, signal: &Signal, encoding: SampleEncoding) -> anyhow::Result<()> {
    let (bits, fmt) = match encoding {
        SampleEncoding::Pcm16 => (16, SampleFormat::Int),
        SampleEncoding::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: bits,
        sample_format: fmt,
    };
    let ctx = || format!("cannot write {}", path.display());
    let mut w = WavWriter::create(path, spec).with_context(ctx)?;
    match encoding {
        SampleEncoding::Pcm16 => {
            for &v in signal.samples() {
                w.write_sample(quantize_pcm16(v)).with_context(ctx)?;
            }
        }
        SampleEncoding::Float32 => {
            for &v in signal.samples() {
                w.write_sample(v as f32).with_context(ctx)?;
            }
        }
    }
    w.finalize().with_context(ctx)?;
    Ok(())
}
