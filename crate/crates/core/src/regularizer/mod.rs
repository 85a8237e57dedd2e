//! Regularization functionals `R`.
//!
//! All three are built on isotropic forward differences with Neumann
//! boundary ([`GradientField`]):
//!
//! * `Tv`: `Σᵢ |∇v|ᵢ`;
//! * `H1Squared`: `½ Σᵢ |∇v|ᵢ²`, with gradient `L v` (Neumann graph Laplacian);
//! * `HuberTv`: `Σᵢ min(β⁻¹|∇v|ᵢ², |∇v|ᵢ)`.
//!
//! `HuberTv` follows the `min` form literally. The quadratic branch has
//! slope 2 at `|∇v| = β` while the linear branch has slope 1, so the per-pixel
//! penalty has a concave kink there and is not convex; its prox is computed by
//! a descent method that returns a stationary point.

mod ops;

use serde::{Deserialize, Serialize};

pub use ops::{gradient, GradientField};

use crate::error::{MindError, Result};
use crate::image::Image;
use crate::linalg::{self, CgOutcome};

pub(crate) use ops::{gradient_adjoint_into, gradient_into, laplacian_into};

/// Dual step of the TV prox; the projected iteration converges for steps below 1/4.
pub const TV_DUAL_STEP: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegularizerKind {
    Tv,
    H1Squared,
    HuberTv { beta: f64 },
}

impl RegularizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            RegularizerKind::Tv => "tv",
            RegularizerKind::H1Squared => "h1-squared",
            RegularizerKind::HuberTv { .. } => "huber-tv",
        }
    }
}

/// A regularizer together with the tolerances of its inner prox solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularizer {
    kind: RegularizerKind,
    prox_tol: f64,
    prox_max_iter: usize,
}

/// Output of [`Regularizer::prox`]; inner non-convergence is flagged, not an error.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub image: Image,
    pub iterations: usize,
    pub converged: bool,
}

/// Warm-start state carried between repeated prox evaluations of one solve.
#[derive(Debug, Clone)]
pub(crate) struct ProxState {
    px: Vec<f64>,
    py: Vec<f64>,
    x: Option<Vec<f64>>,
    grad: GradientField,
    buf: Vec<f64>,
    buf2: Vec<f64>,
}

impl ProxState {
    pub fn new(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            px: vec![0.0; n],
            py: vec![0.0; n],
            x: None,
            grad: GradientField::zeros(width, height),
            buf: vec![0.0; n],
            buf2: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ProxInfo {
    pub iterations: usize,
    pub converged: bool,
}

impl Regularizer {
    /// Regularizer with the default inner tolerances (`1e-6`, 200 iterations).
    pub fn new(kind: RegularizerKind) -> Result<Self> {
        Self::with_prox_settings(kind, 1e-6, 200)
    }

    pub fn with_prox_settings(kind: RegularizerKind, prox_tol: f64, prox_max_iter: usize) -> Result<Self> {
        if let RegularizerKind::HuberTv { beta } = kind {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(MindError::InvalidParameter(format!("Huber beta must be > 0, got {beta}")));
            }
        }
        if !(prox_tol > 0.0) {
            return Err(MindError::InvalidParameter(format!("prox_tol must be > 0, got {prox_tol}")));
        }
        if prox_max_iter == 0 {
            return Err(MindError::InvalidParameter("prox_max_iter must be >= 1".into()));
        }
        Ok(Self {
            kind,
            prox_tol,
            prox_max_iter,
        })
    }

    pub fn tv() -> Self {
        Self::new(RegularizerKind::Tv).expect("valid defaults")
    }

    pub fn h1_squared() -> Self {
        Self::new(RegularizerKind::H1Squared).expect("valid defaults")
    }

    pub fn huber_tv(beta: f64) -> Result<Self> {
        Self::new(RegularizerKind::HuberTv { beta })
    }

    pub fn kind(&self) -> RegularizerKind {
        self.kind
    }

    pub fn prox_tol(&self) -> f64 {
        self.prox_tol
    }

    pub fn prox_max_iter(&self) -> usize {
        self.prox_max_iter
    }

    /// Whether [`gradient`](Self::gradient) is available.
    pub fn is_smooth(&self) -> bool {
        !matches!(self.kind, RegularizerKind::Tv)
    }

    pub fn value(&self, v: &Image) -> f64 {
        let g = gradient(v.values(), v.width(), v.height());
        self.value_of_gradient(&g)
    }

    pub(crate) fn value_of_gradient(&self, g: &GradientField) -> f64 {
        let n = g.dx.len();
        match self.kind {
            RegularizerKind::Tv => (0..n).map(|i| g.magnitude(i)).sum(),
            RegularizerKind::H1Squared => 0.5 * (0..n).map(|i| g.dx[i] * g.dx[i] + g.dy[i] * g.dy[i]).sum::<f64>(),
            RegularizerKind::HuberTv { beta } => (0..n)
                .map(|i| {
                    let t = g.magnitude(i);
                    (t * t / beta).min(t)
                })
                .sum(),
        }
    }

    /// `argmin_x ‖x − v‖²/(2τ) + R(x)`.
    pub fn prox(&self, v: &Image, tau: f64) -> Result<ProxResult> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(MindError::InvalidParameter(format!("prox step tau must be > 0, got {tau}")));
        }
        let mut state = ProxState::new(v.width(), v.height());
        let mut out = vec![0.0; v.n()];
        let info = self.prox_with_state(v.values(), v.width(), v.height(), tau, &mut state, &mut out);
        Ok(ProxResult {
            image: Image::from_raw(v.grid(), out),
            iterations: info.iterations,
            converged: info.converged,
        })
    }

    /// Gradient of a smooth regularizer.
    pub fn gradient(&self, v: &Image) -> Result<Image> {
        let mut g = gradient(v.values(), v.width(), v.height());
        let mut out = vec![0.0; v.n()];
        self.gradient_from_field(&mut g, &mut out)?;
        Ok(Image::from_raw(v.grid(), out))
    }

    /// Overwrites `g` with the dual field `q` and writes `∇ᵀq` into `out`.
    pub(crate) fn gradient_from_field(&self, g: &mut GradientField, out: &mut [f64]) -> Result<()> {
        let n = g.dx.len();
        match self.kind {
            RegularizerKind::Tv => return Err(MindError::UnsupportedForNonsmooth("tv")),
            RegularizerKind::H1Squared => {}
            RegularizerKind::HuberTv { beta } => {
                for i in 0..n {
                    let t = g.magnitude(i);
                    let s = if t <= beta { 2.0 / beta } else { 1.0 / t };
                    g.dx[i] *= s;
                    g.dy[i] *= s;
                }
            }
        }
        gradient_adjoint_into(&g.dx, &g.dy, g.width, g.height, out);
        Ok(())
    }

    /// Generalized Hessian of a smooth regularizer at the point with gradient field `at`, applied to `u`.
    pub(crate) fn hessian_apply(
        &self,
        at: &GradientField,
        u: &[f64],
        work: &mut GradientField,
        out: &mut [f64],
    ) -> Result<()> {
        let (w, h) = (at.width, at.height);
        gradient_into(u, w, h, work);
        match self.kind {
            RegularizerKind::Tv => return Err(MindError::UnsupportedForNonsmooth("tv")),
            RegularizerKind::H1Squared => {}
            RegularizerKind::HuberTv { beta } => {
                for i in 0..u.len() {
                    let t = at.magnitude(i);
                    let (a, b) = (work.dx[i], work.dy[i]);
                    if t <= beta {
                        work.dx[i] = 2.0 * a / beta;
                        work.dy[i] = 2.0 * b / beta;
                    } else {
                        let (nx, ny) = (at.dx[i] / t, at.dy[i] / t);
                        let proj = nx * a + ny * b;
                        work.dx[i] = (a - proj * nx) / t;
                        work.dy[i] = (b - proj * ny) / t;
                    }
                }
            }
        }
        gradient_adjoint_into(&work.dx, &work.dy, w, h, out);
        Ok(())
    }

    pub(crate) fn prox_with_state(
        &self,
        v: &[f64],
        width: usize,
        height: usize,
        tau: f64,
        state: &mut ProxState,
        out: &mut [f64],
    ) -> ProxInfo {
        match self.kind {
            RegularizerKind::Tv => self.tv_prox(v, width, height, tau, state, out),
            RegularizerKind::H1Squared => self.h1_prox(v, width, height, tau, state, out),
            RegularizerKind::HuberTv { beta } => self.huber_prox(v, width, height, tau, beta, state, out),
        }
    }

    /// Projected gradient on the dual: `x = v − τ∇ᵀp`, `p ← P_{|p|≤1}(p + s·∇x/τ)`.
    ///
    /// Stops once the primal iterate moves by at most `prox_tol·max(1, ‖v‖_∞)`.
    fn tv_prox(&self, v: &[f64], width: usize, height: usize, tau: f64, st: &mut ProxState, out: &mut [f64]) -> ProxInfo {
        let n = v.len();
        let step = TV_DUAL_STEP / tau;
        let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let mut iterations = 0;
        let mut converged = false;
        gradient_adjoint_into(&st.px, &st.py, width, height, &mut st.buf);
        for i in 0..n {
            out[i] = v[i] - tau * st.buf[i];
        }
        while iterations < self.prox_max_iter {
            gradient_into(out, width, height, &mut st.grad);
            for i in 0..n {
                let qx = st.px[i] + step * st.grad.dx[i];
                let qy = st.py[i] + step * st.grad.dy[i];
                let norm = qx.hypot(qy).max(1.0);
                st.px[i] = qx / norm;
                st.py[i] = qy / norm;
            }
            gradient_adjoint_into(&st.px, &st.py, width, height, &mut st.buf);
            let mut change: f64 = 0.0;
            for i in 0..n {
                let x = v[i] - tau * st.buf[i];
                change = change.max((x - out[i]).abs());
                out[i] = x;
            }
            iterations += 1;
            if change <= self.prox_tol * scale {
                converged = true;
                break;
            }
        }
        ProxInfo { iterations, converged }
    }

    /// Solves `(I + τL) x = v` by conjugate gradients.
    fn h1_prox(&self, v: &[f64], width: usize, height: usize, tau: f64, st: &mut ProxState, out: &mut [f64]) -> ProxInfo {
        match &st.x {
            Some(x) => out.copy_from_slice(x),
            None => out.copy_from_slice(v),
        }
        let grad = &mut st.grad;
        let lap = &mut st.buf;
        let apply = |u: &[f64], au: &mut [f64]| {
            laplacian_into(u, width, height, grad, lap);
            for i in 0..u.len() {
                au[i] = u[i] + tau * lap[i];
            }
        };
        let CgOutcome {
            iterations, converged, ..
        } = linalg::conjugate_gradient(apply, v, out, None, self.prox_tol, self.prox_max_iter);
        st.x = Some(out.to_vec());
        ProxInfo { iterations, converged }
    }

    /// Accelerated gradient descent with adaptive restart on `‖x − v‖²/(2τ) + TV_β(x)`.
    #[allow(clippy::too_many_arguments)]
    fn huber_prox(
        &self,
        v: &[f64],
        width: usize,
        height: usize,
        tau: f64,
        beta: f64,
        st: &mut ProxState,
        out: &mut [f64],
    ) -> ProxInfo {
        let n = v.len();
        let lipschitz = 1.0 / tau + 16.0 / beta;
        let step = 1.0 / lipschitz;
        let mut x = st.x.take().unwrap_or_else(|| v.to_vec());
        let mut y = x.clone();
        let mut x_prev = x.clone();
        let mut momentum = 1.0_f64;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.prox_max_iter {
            gradient_into(&y, width, height, &mut st.grad);
            self.gradient_from_field(&mut st.grad, &mut st.buf)
                .expect("huber is smooth");
            let mut change: f64 = 0.0;
            let mut scale: f64 = 1.0;
            for i in 0..n {
                let g = (y[i] - v[i]) / tau + st.buf[i];
                x_prev[i] = x[i];
                x[i] = y[i] - step * g;
                st.buf2[i] = g;
                change = change.max((x[i] - x_prev[i]).abs());
                scale = scale.max(x[i].abs());
            }
            iterations += 1;
            if change <= self.prox_tol * scale {
                converged = true;
                break;
            }
            // restart when the momentum direction opposes descent
            let restart: f64 = (0..n).map(|i| st.buf2[i] * (x[i] - x_prev[i])).sum();
            if restart > 0.0 {
                momentum = 1.0;
            }
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let extra = (momentum - 1.0) / next;
            momentum = next;
            for i in 0..n {
                y[i] = x[i] + extra * (x[i] - x_prev[i]);
            }
        }
        out.copy_from_slice(&x);
        st.x = Some(x);
        ProxInfo { iterations, converged }
    }
}
