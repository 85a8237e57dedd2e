use serde::{Deserialize, Serialize};

use super::report::{Recorder, Solution};
use super::{prox_f_star_in_place, MindProblem};
use crate::error::{MindError, Result};
use crate::image::Image;
use crate::linalg::norm;
use crate::regularizer::ProxState;

/// Ratio `δ / (n·τ)` of the default steps; `1` gives `δ = √n/‖K‖`, `τ = 1/(√n‖K‖)`.
pub const DEFAULT_STEP_BALANCE: f64 = 10.0;

/// Step sizes and stopping rule of the primal-dual iteration.
///
/// Construction enforces `τ·δ·‖K‖² ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpConfig {
    theta: f64,
    delta: f64,
    tau: f64,
    operator_norm: f64,
    pub max_iter: usize,
    /// Stop once `‖v_{k+1} − v_k‖ / ‖v_{k+1}‖` falls below this ...
    pub rel_change_tol: f64,
    /// ... and the relative constraint gap is below this.
    pub gap_tol: f64,
}

impl CpConfig {
    pub fn new(theta: f64, delta: f64, tau: f64, operator_norm: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(MindError::InvalidParameter(format!("theta must lie in [0, 1], got {theta}")));
        }
        if !(delta > 0.0 && tau > 0.0 && delta.is_finite() && tau.is_finite()) {
            return Err(MindError::InvalidParameter(format!(
                "step sizes must be positive, got delta={delta} tau={tau}"
            )));
        }
        if !(operator_norm > 0.0 && operator_norm.is_finite()) {
            return Err(MindError::InvalidParameter(format!(
                "operator norm must be positive, got {operator_norm}"
            )));
        }
        let product = tau * delta * operator_norm * operator_norm;
        if product > 1.0 + 1e-12 {
            return Err(MindError::InvalidParameter(format!(
                "step sizes violate tau*delta*|K|^2 <= 1 (got {product})"
            )));
        }
        Ok(Self {
            theta,
            delta,
            tau,
            operator_norm,
            max_iter: 30_000,
            rel_change_tol: 1e-6,
            gap_tol: 1e-3,
        })
    }

    /// `θ = 1`, `δ = b·√n/‖K‖`, `τ = 1/(b·√n·‖K‖)` for an image with `n` pixels
    /// and balance `b`, so that `τδ‖K‖² = 1`.
    pub fn with_balanced_steps(n: usize, operator_norm: f64, balance: f64) -> Result<Self> {
        if !(balance > 0.0 && balance.is_finite()) {
            return Err(MindError::InvalidParameter(format!("balance must be > 0, got {balance}")));
        }
        let sn = (n as f64).sqrt();
        Self::new(
            1.0,
            balance * sn / operator_norm,
            1.0 / (balance * sn * operator_norm),
            operator_norm,
        )
    }

    /// [`CpConfig::with_balanced_steps`] with [`DEFAULT_STEP_BALANCE`].
    pub fn with_default_steps(n: usize, operator_norm: f64) -> Result<Self> {
        Self::with_balanced_steps(n, operator_norm, DEFAULT_STEP_BALANCE)
    }

    /// Default steps using a power-iteration estimate of `‖K‖` for the problem's dictionary.
    pub fn for_problem(p: &MindProblem) -> Result<Self> {
        let norm = p.dictionary().operator_norm(1e-9, 1000)?;
        // the power iteration approaches from below; pad so the step condition holds
        Self::with_default_steps(p.data().n(), norm.value * (1.0 + 1e-6))
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn operator_norm(&self) -> f64 {
        self.operator_norm
    }
}

/// Primal-dual iteration
///
/// ```text
/// w ← prox_{δF*}(w + δ·K v̄)
/// v' ← prox_{τR}(v − τ·K* w)
/// v̄ ← v' + θ(v' − v)
/// ```
///
/// started from `v₀ = v̄₀ = Y`, `w₀ = 0`.
pub fn chambolle_pock(p: &MindProblem, cfg: &CpConfig) -> Result<Solution> {
    let dict = p.dictionary();
    let reg = p.regularizer();
    let grid = p.data().grid();
    let (width, height) = (grid.width(), grid.height());
    let n = grid.n();
    let m = dict.element_count();
    let ky = p.data_coefficients();
    let (theta, delta, tau) = (cfg.theta, cfg.delta, cfg.tau);

    let mut rec = Recorder::new("chambolle-pock");
    let mut v = p.data().values().to_vec();
    let mut v_new = vec![0.0; n];
    let mut w = vec![0.0; m];
    // K v and K v̄ are kept in coefficient space; K v̄ = (1+θ)K v' − θ K v
    let mut kv = ky.to_vec();
    let mut kv_new = vec![0.0; m];
    let mut kv_bar = ky.to_vec();
    let mut ktw = vec![0.0; n];
    let mut arg = vec![0.0; n];
    let mut state = ProxState::new(width, height);

    for _ in 0..cfg.max_iter {
        for (wi, kb) in w.iter_mut().zip(&kv_bar) {
            *wi += delta * kb;
        }
        prox_f_star_in_place(ky, p.q_n(), delta, &mut w);
        dict.adjoint_into(&w, &mut ktw);
        for i in 0..n {
            arg[i] = v[i] - tau * ktw[i];
        }
        let info = reg.prox_with_state(&arg, width, height, tau, &mut state, &mut v_new);
        if !info.converged {
            rec.inner_cap_hit();
        }
        if let Some(i) = v_new.iter().position(|x| !x.is_finite()) {
            return Err(MindError::NonFinite(i));
        }
        dict.analyze_into(&v_new, &mut kv_new);
        for j in 0..m {
            kv_bar[j] = (1.0 + theta) * kv_new[j] - theta * kv[j];
        }
        let change: f64 = v_new.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let rel_change = change / norm(&v_new).max(f64::MIN_POSITIVE);
        std::mem::swap(&mut v, &mut v_new);
        std::mem::swap(&mut kv, &mut kv_new);

        let current = Image::from_raw(grid, v.clone());
        let gap = p.relative_gap(p.residual_sup(&kv));
        rec.push(reg.value(&current), gap, &v, p.reference());
        if rel_change <= cfg.rel_change_tol && gap <= cfg.gap_tol {
            let it = rec.iterations();
            return Ok(Solution {
                estimate: current,
                report: rec.finish(true, format!("converged after {it} iterations")),
            });
        }
    }
    Ok(Solution {
        estimate: Image::from_raw(grid, v),
        report: rec.finish(false, format!("iteration cap {} reached", cfg.max_iter)),
    })
}
