//! Multiscale Nemirovski–Dantzig estimation (MIND) for image denoising.
//!
//! The estimator is the minimizer of a convex regularizer `R(g)` subject to
//! `max_λ |⟨φ_λ, g − Y⟩| ≤ q_n` over a multiscale dictionary `{φ_λ}`. This
//! crate provides the dictionaries (dyadic cubes, small cubes, orthogonal
//! tensor wavelets), the regularizers (TV, squared H¹, Huber-TV), threshold
//! calibration and noise estimation, three solvers (Chambolle–Pock, ADMM,
//! semismooth Newton with path continuation) and the usual quality metrics.

pub mod codec;
pub mod dictionary;
pub mod error;
pub mod image;
pub mod linalg;
pub mod metrics;
pub mod phantom;
pub mod regularizer;
pub mod rng;
pub mod solvers;
pub mod threshold;

pub use crate::dictionary::{CoefficientVector, Dictionary, DictionaryKind, ElementId, ElementKind, WaveletFilter};
pub use crate::error::{MindError, Result};
pub use crate::image::{add_noise, inner_product, snr_to_sigma, Image, ImageGrid, NoiseSpec};
pub use crate::metrics::{mise, psnr, ssim, QualityReport};
pub use crate::regularizer::{Regularizer, RegularizerKind};
pub use crate::solvers::{
    admm, chambolle_pock, kkt_diagnostics, semismooth_newton, AdmmConfig, CpConfig, KktRecord, MindProblem,
    Solution, SolveReport, SsnConfig,
};
pub use crate::threshold::{
    estimate_sigma, monte_carlo_quantile, ms_statistic, universal_threshold, SigmaEstimate, ThresholdSpec,
};
