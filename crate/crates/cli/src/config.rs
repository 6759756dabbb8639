//! Run configuration: defaults, then a flat `key = value` file, then flags.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use phaseaug::{FilterSpec, PolicyConfig, StftConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleEncoding {
    Pcm16,
    Float32,
}

impl FromStr for SampleEncoding {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "pcm16" => Ok(Self::Pcm16),
            "float32" => Ok(Self::Float32),
            other => bail!("unknown format `{other}` (expected pcm16 or float32)"),
        }
    }
}

impl SampleEncoding {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pcm16 => "pcm16",
            Self::Float32 => "float32",
        }
    }
}

/// Flags shared by every subcommand. Anything left unset falls back to the
/// config file, then to the library defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat `key = value` file; flags given on the command line win
    #[arg(long, value_name = "FILE", global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Variance of the per-bin shift noise before smoothing
    #[arg(long, global = true)]
    pub sigma2: Option<f64>,
    /// Global shift is drawn from U(-delta_max, delta_max) samples
    #[arg(long, global = true)]
    pub delta_max: Option<f64>,
    #[arg(long, global = true)]
    pub probability: Option<f64>,
    #[arg(long, global = true)]
    pub n_fft: Option<usize>,
    #[arg(long, global = true)]
    pub hop: Option<usize>,
    #[arg(long, global = true)]
    pub kernel_size: Option<usize>,
    /// Low-pass cutoff in cycles per bin
    #[arg(long, global = true)]
    pub cutoff: Option<f64>,
    /// Transition half-width in cycles per bin
    #[arg(long, global = true)]
    pub transition: Option<f64>,
    #[arg(long, value_name = "DIR", global = true)]
    pub out_dir: Option<PathBuf>,
    /// Output sample format; defaults to the input's
    #[arg(long, value_enum, global = true)]
    pub format: Option<SampleEncoding>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub policy: PolicyConfig,
    pub out_dir: PathBuf,
    pub format: Option<SampleEncoding>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            policy: PolicyConfig::default(),
            out_dir: PathBuf::from("."),
            format: None,
        }
    }
}

const KEYS: &[&str] = &[
    "seed",
    "sigma2",
    "delta_max",
    "probability",
    "n_fft",
    "hop",
    "kernel_size",
    "cutoff",
    "transition",
    "out_dir",
    "format",
];

/// Values as read, before they are folded into a [`RunConfig`].
pub fn parse_file_text(text: &str) -> anyhow::Result<ConfigArgs> {
    let mut out = ConfigArgs::default();
    let mut seen = HashSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {lineno}: expected `key = value`"))?;
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        if !KEYS.contains(&key.as_str()) {
            bail!("line {lineno}: unknown key `{key}`");
        }
        if !seen.insert(key.clone()) {
            bail!("line {lineno}: duplicate key `{key}`");
        }
        let ctx = || format!("line {lineno}: bad value for `{key}`: `{value}`");
        match key.as_str() {
            "seed" => out.seed = Some(value.parse().with_context(ctx)?),
            "sigma2" => out.sigma2 = Some(value.parse().with_context(ctx)?),
            "delta_max" => out.delta_max = Some(value.parse().with_context(ctx)?),
            "probability" => out.probability = Some(value.parse().with_context(ctx)?),
            "n_fft" => out.n_fft = Some(value.parse().with_context(ctx)?),
            "hop" => out.hop = Some(value.parse().with_context(ctx)?),
            "kernel_size" => out.kernel_size = Some(value.parse().with_context(ctx)?),
            "cutoff" => out.cutoff = Some(value.parse().with_context(ctx)?),
            "transition" => out.transition = Some(value.parse().with_context(ctx)?),
            "out_dir" => out.out_dir = Some(PathBuf::from(value)),
            "format" => out.format = Some(value.parse().with_context(ctx)?),
            _ => unreachable!(),
        }
    }
    Ok(out)
}

impl ConfigArgs {
    fn overlay(&self, base: &ConfigArgs) -> ConfigArgs {
        ConfigArgs {
            config: None,
            seed: self.seed.or(base.seed),
            sigma2: self.sigma2.or(base.sigma2),
            delta_max: self.delta_max.or(base.delta_max),
            probability: self.probability.or(base.probability),
            n_fft: self.n_fft.or(base.n_fft),
            hop: self.hop.or(base.hop),
            kernel_size: self.kernel_size.or(base.kernel_size),
            cutoff: self.cutoff.or(base.cutoff),
            transition: self.transition.or(base.transition),
            out_dir: self.out_dir.clone().or_else(|| base.out_dir.clone()),
            format: self.format.or(base.format),
        }
    }

    /// Reads the config file (if any), applies the flags on top and
    /// validates the result.
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let file = match &self.config {
            Some(path) => load_file(path)?,
            None => ConfigArgs::default(),
        };
        let merged = self.overlay(&file);
        let defaults = RunConfig::default();
        let p = defaults.policy;
        let n_fft = merged.n_fft.unwrap_or(p.stft.n_fft());
        let stft = StftConfig::new(n_fft, merged.hop.unwrap_or(n_fft / 4))?;
        let filter = FilterSpec {
            kernel_size: merged.kernel_size.unwrap_or(p.filter.kernel_size),
            cutoff: merged.cutoff.unwrap_or(p.filter.cutoff),
            transition_half_width: merged.transition.unwrap_or(p.filter.transition_half_width),
        };
        let policy = PolicyConfig {
            delta_max: merged.delta_max.unwrap_or(p.delta_max),
            sigma2: merged.sigma2.unwrap_or(p.sigma2),
            probability: merged.probability.unwrap_or(p.probability),
            stft,
            filter,
            seed: merged.seed.unwrap_or(p.seed),
        };
        policy.validate()?;
        Ok(RunConfig {
            policy,
            out_dir: merged.out_dir.unwrap_or(defaults.out_dir),
            format: merged.format,
        })
    }
}

fn load_file(path: &Path) -> anyhow::Result<ConfigArgs> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    parse_file_text(&text).with_context(|| format!("in config {}", path.display()))
}

impl RunConfig {
    /// Renders the config in the file format accepted by `--config`.
    pub fn to_file_text(&self) -> String {
        let p = &self.policy;
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", p.seed);
        let _ = writeln!(s, "sigma2 = {}", p.sigma2);
        let _ = writeln!(s, "delta_max = {}", p.delta_max);
        let _ = writeln!(s, "probability = {}", p.probability);
        let _ = writeln!(s, "n_fft = {}", p.stft.n_fft());
        let _ = writeln!(s, "hop = {}", p.stft.hop());
        let _ = writeln!(s, "kernel_size = {}", p.filter.kernel_size);
        let _ = writeln!(s, "cutoff = {}", p.filter.cutoff);
        let _ = writeln!(s, "transition = {}", p.filter.transition_half_width);
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        if let Some(f) = self.format {
            let _ = writeln!(s, "format = {}", f.name());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.policy.seed = 42;
        cfg.policy.sigma2 = 5.2;
        cfg.policy.filter.cutoff = 0.1;
        cfg.format = Some(SampleEncoding::Float32);
        let parsed = parse_file_text(&cfg.to_file_text()).unwrap();
        assert_eq!(parsed.resolve().unwrap(), cfg);
    }

    #[test]
    fn comments_hyphens_and_errors() {
        let a = parse_file_text("# hi\n\ndelta-max = 1.5  # trailing\n").unwrap();
        assert_eq!(a.delta_max, Some(1.5));
        assert!(parse_file_text("bogus = 1").is_err());
        assert!(parse_file_text("seed = 1\nseed = 2").is_err());
        assert!(parse_file_text("seed 1").is_err());
        assert!(parse_file_text("sigma2 = lots").is_err());
        assert!(parse_file_text("format = pcm24").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = parse_file_text("seed = 7\nsigma2 = 3").unwrap();
        let flags = ConfigArgs {
            seed: Some(9),
            ..Default::default()
        };
        let m = flags.overlay(&file);
        assert_eq!(m.seed, Some(9));
        assert_eq!(m.sigma2, Some(3.0));
    }

    #[test]
    fn invalid_policy_rejected() {
        let args = ConfigArgs {
            probability: Some(1.5),
            ..Default::default()
        };
        assert!(args.resolve().is_err());
        let args = ConfigArgs {
            n_fft: Some(1000),
            hop: Some(7),
            ..Default::default()
        };
        assert!(args.resolve().is_ok());
        let args = ConfigArgs {
            n_fft: Some(1001),
            ..Default::default()
        };
        assert!(args.resolve().is_err());
    }
}
