use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mind_core::phantom::PhantomKind;

use crate::config::{DictionaryChoice, RegChoice, SolverChoice};

/// Multiscale Nemirovski-Dantzig image denoising.
///
/// Exit status: 0 on success, 1 on error, 2 when outputs were written but a
/// solver stopped without meeting its convergence criteria.
#[derive(Debug, Parser)]
#[command(name = "mind", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Denoise one image and write the estimate, a JSON report and a CSV trace.
    Denoise(ProblemArgs),
    /// Run every solver applicable to the regularizer on the same problem.
    Compare {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Long-run solution used for the distance-to-limit trace column.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Calibrate q_n and print it; stores the result when --cache is given.
    Threshold(ProblemArgs),
    /// MISE, PSNR and SSIM of an estimate against ground truth, as JSON.
    Metrics {
        estimate: PathBuf,
        truth: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        peak: f64,
    },
    /// Add seeded Gaussian noise to an image.
    AddNoise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Noise level; alternatively give --snr.
        #[arg(long, conflicts_with = "snr")]
        sigma: Option<f64>,
        /// Peak-to-noise ratio max|f|/σ.
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Difference-based estimate of the noise level, as JSON.
    EstimateNoise {
        #[arg(long)]
        input: PathBuf,
    },
    /// Write a synthetic test image.
    Phantom {
        #[arg(long, default_value = "blocks")]
        kind: PhantomKind,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Problem settings shared by denoise, compare and threshold. Every flag can
/// also be set in the --config file under its long name.
#[derive(Debug, Default, Args)]
pub struct ProblemArgs {
    /// Flat key = value file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Noisy image (binary PGM or PNG).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Ground truth for the quality report.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Generate the data from a phantom instead: blocks, ramp or bubbles.
    #[arg(long)]
    pub phantom: Option<PhantomKind>,
    /// Phantom side length [default: 64].
    #[arg(long)]
    pub size: Option<usize>,
    /// Phantom peak-to-noise ratio [default: 20].
    #[arg(long)]
    pub snr: Option<f64>,
    /// Phantom noise seed [default: 1].
    #[arg(long)]
    pub noise_seed: Option<u64>,

    /// dyadic, small-cubes or wavelet [default: small-cubes].
    #[arg(long)]
    pub dictionary: Option<DictionaryChoice>,
    /// Largest small-cube edge [default: min(30, side)].
    #[arg(long)]
    pub max_edge: Option<usize>,
    /// haar or sym6 [default: sym6].
    #[arg(long)]
    pub wavelet: Option<String>,
    /// Dyadic or wavelet depth [default: full].
    #[arg(long)]
    pub depth: Option<u32>,

    /// tv, h1 or huber-tv [default: tv].
    #[arg(long)]
    pub regularizer: Option<RegChoice>,
    /// Huber parameter [default: 0.05].
    #[arg(long)]
    pub beta: Option<f64>,
    /// cp, admm or ssn [default: cp].
    #[arg(long)]
    pub solver: Option<SolverChoice>,

    /// Monte-Carlo threshold: the (1 - alpha)-quantile [default: 0.5].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Monte-Carlo repetitions [default: 1000].
    #[arg(long)]
    pub reps: Option<usize>,
    /// Monte-Carlo seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Universal threshold C·σ·sqrt(log n / n) with this C.
    #[arg(long)]
    pub universal: Option<f64>,
    /// Use this q_n directly.
    #[arg(long = "q-n")]
    pub q_n: Option<f64>,
    /// Known noise level; estimated from the data when absent.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Threshold cache file, reused when dictionary, alpha, reps and seed match.
    #[arg(long)]
    pub cache: Option<PathBuf>,

    /// PSNR/SSIM peak value [default: 1].
    #[arg(long)]
    pub peak: Option<f64>,
    /// Outer iteration cap [default: 30000 for cp, 3000 for admm].
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Chambolle-Pock ratio δ/(nτ) [default: 10].
    #[arg(long)]
    pub step_balance: Option<f64>,
    /// ADMM penalty [default: 1000 for h1, 1000/|K|² otherwise].
    #[arg(long)]
    pub rho: Option<f64>,
    /// ADMM stopping tolerance relative to q_n [default: 1e-3].
    #[arg(long)]
    pub eps_stop: Option<f64>,
    /// Semismooth Newton initial δ [default: 1/3].
    #[arg(long)]
    pub delta_init: Option<f64>,
    /// Semismooth Newton δ reduction factor [default: 1/3].
    #[arg(long)]
    pub delta_factor: Option<f64>,
    /// Semismooth Newton smallest δ [default: 1e-10].
    #[arg(long)]
    pub delta_min: Option<f64>,
    /// Semismooth Newton violated-constraint fraction [default: 0.05].
    #[arg(long)]
    pub rho_min: Option<f64>,
    /// Semismooth Newton relative violation [default: 1e-7].
    #[arg(long)]
    pub r_min: Option<f64>,

    /// Directory for images, reports and traces [default: out].
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}
