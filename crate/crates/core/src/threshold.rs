//! Multiscale statistic, threshold calibration and noise-level estimation.

use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{MindError, Result};
use crate::image::Image;
use crate::rng;

/// `‖K r‖_∞ = max_λ |⟨φ_λ, r⟩|`.
pub fn ms_statistic(dict: &Dictionary, r: &Image) -> Result<f64> {
    Ok(dict.analyze(r)?.max_abs())
}

/// Monte-Carlo calibration parameters for `q_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    /// The threshold is the empirical `(1 − alpha)`-quantile; `0.5` gives the median rule.
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    pub sigma: f64,
}

impl ThresholdSpec {
    pub fn median(sigma: f64, seed: u64) -> Self {
        Self {
            alpha: 0.5,
            reps: 1000,
            seed,
            sigma,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(MindError::InvalidParameter(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if self.reps == 0 {
            return Err(MindError::InvalidParameter("reps must be >= 1".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(MindError::InvalidParameter(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Unscaled multiscale statistics of `reps` independent standard-normal noise images.
///
/// Repetition `k` draws from sub-stream `k` of the seed, so the sample does not
/// depend on thread scheduling.
pub fn noise_statistics(dict: &Dictionary, reps: usize, seed: u64) -> Vec<f64> {
    let grid = dict.grid();
    (0..reps)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::substream(seed, k as u64);
            let values: Vec<f64> = (0..grid.n()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut coeffs = vec![0.0; dict.element_count()];
            dict.analyze_into(&values, &mut coeffs);
            coeffs.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
        })
        .collect()
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn empirical_quantile(sample: &mut [f64], prob: f64) -> f64 {
    sample.sort_by(|a, b| a.total_cmp(b));
    let pos = prob.clamp(0.0, 1.0) * (sample.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    sample[lo] + t * (sample[hi] - sample[lo])
}

/// The `(1 − alpha)`-quantile of `σ·‖ε‖_MS` over `reps` simulated noise images.
pub fn monte_carlo_quantile(dict: &Dictionary, spec: &ThresholdSpec) -> Result<f64> {
    spec.validate()?;
    if spec.sigma == 0.0 {
        return Ok(0.0);
    }
    let mut sample = noise_statistics(dict, spec.reps, spec.seed);
    Ok(spec.sigma * empirical_quantile(&mut sample, 1.0 - spec.alpha))
}

/// `C·σ·√(log n / n)` with the natural logarithm.
pub fn universal_threshold(c: f64, sigma: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(MindError::InvalidParameter(format!("universal threshold needs n >= 2, got {n}")));
    }
    if !(c > 0.0) {
        return Err(MindError::InvalidParameter(format!("C must be > 0, got {c}")));
    }
    if !(sigma >= 0.0) {
        return Err(MindError::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    let n = n as f64;
    Ok(c * sigma * (n.ln() / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMethod {
    /// Five-point second-order difference mask normalized by `√20`.
    SecondOrderDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub sigma_hat: f64,
    pub method: SigmaMethod,
}

/// Difference-based noise estimate from interior pseudo-residuals
/// `e = (4Y_{j,k} − Y_{j−1,k} − Y_{j+1,k} − Y_{j,k−1} − Y_{j,k+1}) / √20`.
///
/// The mask annihilates affine trends, so `σ̂ = √(mean e²)` is unbiased for
/// `σ²` where the signal is locally linear. Residuals within the rounding
/// error of the stencil count as zero, which makes affine images give exactly 0.
pub fn estimate_sigma(y: &Image) -> Result<SigmaEstimate> {
    let (w, h) = (y.width(), y.height());
    if w < 3 || h < 3 {
        return Err(MindError::InvalidGrid(format!("noise estimation needs at least 3x3, got {w}x{h}")));
    }
    let v = y.values();
    let mut sum = 0.0;
    for row in 1..h - 1 {
        for col in 1..w - 1 {
            let i = row * w + col;
            let e = 4.0 * v[i] - v[i - 1] - v[i + 1] - v[i - w] - v[i + w];
            // below the rounding error of the stencil itself, e carries no noise information
            let bound = 8.0 * f64::EPSILON * (4.0 * v[i].abs() + v[i - 1].abs() + v[i + 1].abs() + v[i - w].abs() + v[i + w].abs());
            if e.abs() > bound {
                sum += e * e;
            }
        }
    }
    let count = ((w - 2) * (h - 2)) as f64;
    Ok(SigmaEstimate {
        sigma_hat: (sum / (20.0 * count)).sqrt(),
        method: SigmaMethod::SecondOrderDifference,
    })
}

/// Cached calibration result, keyed by everything that determines it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub dictionary_fingerprint: String,
    pub n: usize,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    pub generator: String,
    pub sigma: f64,
    pub q_n: f64,
}

impl ThresholdRecord {
    pub fn new(dict: &Dictionary, spec: &ThresholdSpec, q_n: f64) -> Self {
        Self {
            dictionary_fingerprint: dict.fingerprint(),
            n: dict.grid().n(),
            alpha: spec.alpha,
            reps: spec.reps,
            seed: spec.seed,
            generator: rng::GENERATOR_NAME.to_string(),
            sigma: spec.sigma,
            q_n,
        }
    }

    /// Whether this record was produced for `(dict, spec)`; `sigma` only rescales the result.
    pub fn matches(&self, dict: &Dictionary, spec: &ThresholdSpec) -> bool {
        self.dictionary_fingerprint == dict.fingerprint()
            && self.n == dict.grid().n()
            && self.alpha == spec.alpha
            && self.reps == spec.reps
            && self.seed == spec.seed
            && self.generator == rng::GENERATOR_NAME
    }

    /// The cached threshold rescaled to `sigma`.
    pub fn q_for_sigma(&self, sigma: f64) -> Option<f64> {
        if self.sigma > 0.0 {
            Some(self.q_n / self.sigma * sigma)
        } else {
            None
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Calibrates `q_n`, reusing the record at `cache` when it matches and storing a new one otherwise.
pub fn cached_monte_carlo_quantile(dict: &Dictionary, spec: &ThresholdSpec, cache: &Path) -> Result<ThresholdRecord> {
    if let Ok(record) = ThresholdRecord::load(cache) {
        if record.matches(dict, spec) {
            if let Some(q) = record.q_for_sigma(spec.sigma) {
                return Ok(ThresholdRecord {
                    sigma: spec.sigma,
                    q_n: q,
                    ..record
                });
            }
        }
    }
    let q = monte_carlo_quantile(dict, spec)?;
    let record = ThresholdRecord::new(dict, spec, q);
    record.save(cache)?;
    Ok(record)
}
