use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use phaseaug::metrics::MelConfig;
use phaseaug::phase::max_shift;
use phaseaug::{design_kaiser_sinc, mel_mae, mstft_distance, time_shift, MultiResConfig, Policy};
use phaseaug::{verify, Augmented, RngState};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::wav;

/// Distinguishes bad invocations (exit 2) from failed work (exit 1).
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Processing(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Processing(_) => 1,
        }
    }
}

pub type Outcome = Result<(), Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn processing(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Processing(e.into())
}

/// Substream key for a file: the first 8 bytes of SHA-256 of its name.
pub fn stream_key(file_name: &str) -> u64 {
    let digest = Sha256::digest(file_name.as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string())
}

/// Expands directories to their `*.wav` entries (not recursive) and sorts
/// everything by file name.
pub fn collect_inputs(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            for entry in fs::read_dir(p).with_context(|| format!("cannot list {}", p.display()))? {
                let path = entry?.path();
                let is_wav = path
                    .extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
                if is_wav && path.is_file() {
                    files.push(path);
                }
            }
        } else {
            files.push(p.clone());
        }
    }
    files.sort_by(|a, b| file_name(a).cmp(&file_name(b)).then_with(|| a.cmp(b)));
    let mut seen: HashMap<String, &PathBuf> = HashMap::new();
    for f in &files {
        if let Some(prev) = seen.insert(file_name(f), f) {
            return Err(anyhow!(
                "{} and {} share a file name; outputs and random streams would collide",
                prev.display(),
                f.display()
            ));
        }
    }
    Ok(files)
}

struct Report {
    name: String,
    key: u64,
    result: anyhow::Result<(Augmented, f64, f64, PathBuf)>,
}

fn augment_one(
    policy: &Policy,
    cfg: &RunConfig,
    path: &Path,
    key: u64,
) -> anyhow::Result<(Augmented, f64, f64, PathBuf)> {
    let input = wav::read(path)?;
    let x = &input.signal;
    let mut rng = RngState::new(cfg.policy.seed).substream(key);
    let aug = policy.augment_traced(x, &mut rng)?;
    let mel_cfg = MelConfig::for_sample_rate(x.sample_rate());
    let mae = mel_mae(x, &aug.signal, &mel_cfg)?;
    let mstft = mstft_distance(x, &aug.signal, &MultiResConfig::default())?;
    let out = cfg.out_dir.join(format!("{}.aug.wav", stem(path)));
    wav::write(&out, &aug.signal, cfg.format.unwrap_or(input.encoding))?;
    Ok((aug, mae, mstft, out))
}

pub fn augment(cfg: &RunConfig, inputs: &[PathBuf]) -> Outcome {
    let files = collect_inputs(inputs).map_err(usage)?;
    if files.is_empty() {
        return Err(usage(anyhow!("no WAV inputs found")));
    }
    let policy = Policy::new(cfg.policy).map_err(usage)?;
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("cannot create {}", cfg.out_dir.display()))
        .map_err(processing)?;
    let record = cfg.out_dir.join("phaseaug.cfg");
    fs::write(&record, cfg.to_file_text())
        .with_context(|| format!("cannot write {}", record.display()))
        .map_err(processing)?;

    let reports: Vec<Report> = files
        .par_iter()
        .map(|path| {
            let name = file_name(path);
            let key = stream_key(&name);
            let result = augment_one(&policy, cfg, path, key);
            Report { name, key, result }
        })
        .collect();

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut failed = 0;
    let mel_floor = MelConfig::default().floor;
    for r in &reports {
        match &r.result {
            Ok((aug, mae, mstft, path)) => {
                let mut line = format!(
                    "file={} seed={} stream={:016x}",
                    r.name, cfg.policy.seed, r.key
                );
                match &aug.draw {
                    Some(d) => {
                        let _ = write!(line, " applied=true delta={:.6}", d.delta);
                    }
                    None => line.push_str(" applied=false delta=none"),
                }
                let _ = write!(
                    line,
                    " mel_mae={mae:.6e} mstft={mstft:.6e} mel_floor={mel_floor:e} output={}",
                    path.display()
                );
                writeln!(out, "{line}").map_err(processing)?;
            }
            Err(e) => {
                failed += 1;
                eprintln!("error file={} message=\"{:#}\"", r.name, e);
            }
        }
    }
    if failed > 0 {
        return Err(processing(anyhow!(
            "{failed} of {} files failed",
            reports.len()
        )));
    }
    Ok(())
}

pub fn shift(cfg: &RunConfig, input: &Path, delta: f64, emit_plot: bool) -> Outcome {
    let stft = cfg.policy.stft;
    let bound = max_shift(stft);
    if !delta.is_finite() || delta.abs() > bound {
        return Err(usage(anyhow!(
            "delta {delta} outside the admissible range [-{bound}, {bound}] for n_fft={}",
            stft.n_fft()
        )));
    }
    let wav_in = wav::read(input).map_err(processing)?;
    let x = &wav_in.signal;
    let y = time_shift(x, delta, stft).map_err(processing)?;
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("cannot create {}", cfg.out_dir.display()))
        .map_err(processing)?;
    let out = cfg.out_dir.join(format!("{}.shift.wav", stem(input)));
    wav::write(&out, &y, cfg.format.unwrap_or(wav_in.encoding)).map_err(processing)?;
    println!(
        "file={} delta={delta} output={}",
        file_name(input),
        out.display()
    );

    if emit_plot {
        let plot = cfg.out_dir.join(format!("{}.shift.dat", stem(input)));
        let mut text = format!(
            "# delta={delta} n_fft={} hop={} sample_rate={}\n# n x shifted\n",
            stft.n_fft(),
            stft.hop(),
            x.sample_rate()
        );
        for (n, (a, b)) in x.samples().iter().zip(y.samples()).enumerate() {
            let _ = writeln!(text, "{n} {a:.9e} {b:.9e}");
        }
        fs::write(&plot, text)
            .with_context(|| format!("cannot write {}", plot.display()))
            .map_err(processing)?;
        println!("plot={}", plot.display());
    }
    Ok(())
}

pub fn design_filter(cfg: &RunConfig) -> Outcome {
    let spec = cfg.policy.filter;
    let kernel = design_kaiser_sinc(spec).map_err(usage)?;
    let sum_sq = kernel.sum_of_squares();
    let mut text = String::new();
    let _ = writeln!(text, "kernel_size={}", spec.kernel_size);
    let _ = writeln!(text, "cutoff={}", spec.cutoff);
    let _ = writeln!(text, "transition={}", spec.transition_half_width);
    let _ = writeln!(text, "attenuation_db={:.6}", spec.attenuation());
    let _ = writeln!(text, "beta={:.9}", spec.beta());
    let _ = writeln!(text, "sum={:.12}", kernel.sum());
    let _ = writeln!(text, "sum_sq={sum_sq:.9}");
    let _ = writeln!(text, "variance_reduction={:.6}", 1.0 - sum_sq);
    text.push_str("# k h\n");
    for (k, h) in kernel.taps().iter().enumerate() {
        let _ = writeln!(text, "{k} {h:.12e}");
    }
    io::stdout().write_all(text.as_bytes()).map_err(processing)
}

pub fn run_verify(cfg: &RunConfig) -> Outcome {
    let start = Instant::now();
    let outcomes = verify::run_all(&cfg.policy).map_err(usage)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for o in &outcomes {
        writeln!(out, "{o}").map_err(processing)?;
    }
    let failed: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.name)
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    if failed.is_empty() {
        writeln!(
            out,
            "verify status=PASS checks={} elapsed_s={elapsed:.2}",
            outcomes.len()
        )
        .map_err(processing)?;
        Ok(())
    } else {
        writeln!(
            out,
            "verify status=FAIL checks={} failed={} elapsed_s={elapsed:.2}",
            outcomes.len(),
            failed.join(",")
        )
        .map_err(processing)?;
        Err(processing(anyhow!("failed checks: {}", failed.join(", "))))
    }
}
