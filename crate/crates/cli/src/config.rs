//! Flat `key = value` run configuration, overridden by command-line flags.
//!
//! Keys are the long flag names (`regularizer = tv`, `max-edge = 16`). Blank
//! lines and lines starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use mind_core::phantom::PhantomKind;
use mind_core::{DictionaryKind, RegularizerKind, WaveletFilter};
use serde::Serialize;

use crate::args::ProblemArgs;

#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, (String, usize)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("line {}: expected key = value, got {raw:?}", i + 1);
            };
            let key = k.trim().to_string();
            if entries.insert(key.clone(), (v.trim().to_string(), i + 1)).is_some() {
                bail!("line {}: duplicate key {key:?}", i + 1);
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// The flag value if given, else the parsed config entry, else `None`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config line {line}: bad value {v:?} for {key}: {e}")),
        }
    }

    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        for (k, (_, line)) in &self.entries {
            if !known.contains(&k.as_str()) {
                bail!("config line {line}: unknown key {k:?}");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DictionaryChoice {
    Dyadic,
    SmallCubes,
    Wavelet,
}

impl FromStr for DictionaryChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dyadic" | "dyadic-cubes" => Ok(Self::Dyadic),
            "small" | "small-cubes" => Ok(Self::SmallCubes),
            "wavelet" => Ok(Self::Wavelet),
            _ => Err(format!("unknown dictionary {s:?} (dyadic, small-cubes, wavelet)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegChoice {
    Tv,
    H1,
    HuberTv,
}

impl FromStr for RegChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "tv" => Ok(Self::Tv),
            "h1" | "h1-squared" => Ok(Self::H1),
            "huber" | "huber-tv" => Ok(Self::HuberTv),
            _ => Err(format!("unknown regularizer {s:?} (tv, h1, huber-tv)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    ChambollePock,
    Admm,
    Ssn,
}

impl FromStr for SolverChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cp" | "chambolle-pock" => Ok(Self::ChambollePock),
            "admm" => Ok(Self::Admm),
            "ssn" | "semismooth-newton" => Ok(Self::Ssn),
            _ => Err(format!("unknown solver {s:?} (cp, admm, ssn)")),
        }
    }
}

pub fn parse_filter(s: &str) -> std::result::Result<WaveletFilter, String> {
    match s {
        "haar" => Ok(WaveletFilter::Haar),
        "sym6" => Ok(WaveletFilter::Symlet6),
        _ => Err(format!("unknown wavelet {s:?} (haar, sym6)")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum ThresholdMode {
    /// Monte-Carlo `(1 − alpha)`-quantile of the multiscale statistic.
    MonteCarlo { alpha: f64, reps: usize, seed: u64 },
    /// `C·σ·√(log n / n)`.
    Universal { c: f64 },
    Explicit { q_n: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum SigmaMode {
    Known { sigma: f64 },
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Source {
    File { path: PathBuf, truth: Option<PathBuf> },
    Phantom { phantom: PhantomKind, size: usize, snr: f64, noise_seed: u64 },
}

/// Fully resolved settings of one run; serialized into every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub source: Source,
    pub dictionary: DictionaryChoice,
    pub max_edge: Option<usize>,
    pub wavelet: String,
    pub depth: Option<u32>,
    pub regularizer: RegChoice,
    pub beta: f64,
    pub solver: SolverChoice,
    pub threshold: ThresholdMode,
    pub sigma: SigmaMode,
    pub cache: Option<PathBuf>,
    pub peak: f64,
    pub max_iter: Option<usize>,
    pub step_balance: Option<f64>,
    pub rho: Option<f64>,
    pub eps_stop: Option<f64>,
    pub delta_init: Option<f64>,
    pub delta_factor: Option<f64>,
    pub delta_min: Option<f64>,
    pub rho_min: Option<f64>,
    pub r_min: Option<f64>,
    pub output_dir: PathBuf,
}

pub const KNOWN_KEYS: &[&str] = &[
    "input",
    "truth",
    "phantom",
    "size",
    "snr",
    "noise-seed",
    "dictionary",
    "max-edge",
    "wavelet",
    "depth",
    "regularizer",
    "beta",
    "solver",
    "alpha",
    "reps",
    "seed",
    "universal",
    "q-n",
    "sigma",
    "cache",
    "peak",
    "max-iter",
    "step-balance",
    "rho",
    "eps-stop",
    "delta-init",
    "delta-factor",
    "delta-min",
    "rho-min",
    "r-min",
    "output-dir",
];

impl RunConfig {
    pub fn resolve(a: ProblemArgs) -> Result<Self> {
        let cfg = match &a.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        cfg.check_keys(KNOWN_KEYS)?;

        // a source flag replaces whatever source the config file names
        let (input, phantom) = if a.input.is_some() || a.phantom.is_some() {
            (a.input, a.phantom)
        } else {
            (cfg.pick(None, "input")?, cfg.pick(None, "phantom")?)
        };
        let source = match (input, phantom) {
            (Some(path), None) => Source::File {
                path,
                truth: cfg.pick(a.truth, "truth")?,
            },
            (None, Some(phantom)) => Source::Phantom {
                phantom,
                size: cfg.pick(a.size, "size")?.unwrap_or(64),
                snr: cfg.pick(a.snr, "snr")?.unwrap_or(20.0),
                noise_seed: cfg.pick(a.noise_seed, "noise-seed")?.unwrap_or(1),
            },
            (Some(_), Some(_)) => bail!("give either an input image or a phantom, not both"),
            (None, None) => bail!("no data: pass --input FILE or --phantom KIND"),
        };

        let explicit: Option<f64> = cfg.pick(a.q_n, "q-n")?;
        let universal: Option<f64> = cfg.pick(a.universal, "universal")?;
        let alpha: Option<f64> = cfg.pick(a.alpha, "alpha")?;
        let threshold = match (explicit, universal, alpha) {
            (Some(q_n), None, None) => ThresholdMode::Explicit { q_n },
            (None, Some(c), None) => ThresholdMode::Universal { c },
            (None, None, alpha) => ThresholdMode::MonteCarlo {
                alpha: alpha.unwrap_or(0.5),
                reps: cfg.pick(a.reps, "reps")?.unwrap_or(1000),
                seed: cfg.pick(a.seed, "seed")?.unwrap_or(0),
            },
            _ => bail!("choose one threshold mode: --q-n, --universal or --alpha"),
        };
        let sigma = match cfg.pick(a.sigma, "sigma")? {
            Some(sigma) => SigmaMode::Known { sigma },
            None => SigmaMode::Estimate,
        };
        let wavelet: String = cfg.pick(a.wavelet, "wavelet")?.unwrap_or_else(|| "sym6".into());
        parse_filter(&wavelet).map_err(anyhow::Error::msg)?;

        Ok(Self {
            source,
            dictionary: cfg.pick(a.dictionary, "dictionary")?.unwrap_or(DictionaryChoice::SmallCubes),
            max_edge: cfg.pick(a.max_edge, "max-edge")?,
            wavelet,
            depth: cfg.pick(a.depth, "depth")?,
            regularizer: cfg.pick(a.regularizer, "regularizer")?.unwrap_or(RegChoice::Tv),
            beta: cfg.pick(a.beta, "beta")?.unwrap_or(0.05),
            solver: cfg.pick(a.solver, "solver")?.unwrap_or(SolverChoice::ChambollePock),
            threshold,
            sigma,
            cache: cfg.pick(a.cache, "cache")?,
            peak: cfg.pick(a.peak, "peak")?.unwrap_or(1.0),
            max_iter: cfg.pick(a.max_iter, "max-iter")?,
            step_balance: cfg.pick(a.step_balance, "step-balance")?,
            rho: cfg.pick(a.rho, "rho")?,
            eps_stop: cfg.pick(a.eps_stop, "eps-stop")?,
            delta_init: cfg.pick(a.delta_init, "delta-init")?,
            delta_factor: cfg.pick(a.delta_factor, "delta-factor")?,
            delta_min: cfg.pick(a.delta_min, "delta-min")?,
            rho_min: cfg.pick(a.rho_min, "rho-min")?,
            r_min: cfg.pick(a.r_min, "r-min")?,
            output_dir: cfg.pick(a.output_dir, "output-dir")?.unwrap_or_else(|| PathBuf::from("out")),
        })
    }

    /// Small cubes default to edge 30, capped by the image side.
    pub fn dictionary_kind(&self, width: usize, height: usize) -> Result<DictionaryKind> {
        Ok(match self.dictionary {
            DictionaryChoice::Dyadic => DictionaryKind::DyadicCubes { depth: self.depth },
            DictionaryChoice::SmallCubes => DictionaryKind::SmallCubes {
                max_edge: self.max_edge.unwrap_or(30.min(width.min(height))),
            },
            DictionaryChoice::Wavelet => DictionaryKind::Wavelet {
                filter: parse_filter(&self.wavelet).map_err(anyhow::Error::msg)?,
                depth: self.depth,
            },
        })
    }

    pub fn regularizer_kind(&self) -> RegularizerKind {
        match self.regularizer {
            RegChoice::Tv => RegularizerKind::Tv,
            RegChoice::H1 => RegularizerKind::H1Squared,
            RegChoice::HuberTv => RegularizerKind::HuberTv { beta: self.beta },
        }
    }
}
