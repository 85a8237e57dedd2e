use serde::{Deserialize, Serialize};

use super::report::{Recorder, Solution};
use super::MindProblem;
use crate::error::{MindError, Result};
use crate::image::Image;
use crate::linalg::{conjugate_gradient, norm};
use crate::regularizer::{gradient_adjoint_into, gradient_into, laplacian_into, GradientField, ProxState, RegularizerKind};

/// Penalty, iteration budgets and stopping rule of the ADMM solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub rho: f64,
    pub max_iter: usize,
    /// Stop once `max(‖Kv − w‖_∞, ‖K(v_k − v_{k−1})‖_∞) ≤ eps_stop·q_n`
    /// (`eps_stop·‖KY‖_∞` when `q_n = 0`). Since `w` stays in the box this
    /// bounds the relative constraint gap by `eps_stop`.
    pub eps_stop: f64,
    /// Inner iterations per `v`-update for non-quadratic regularizers.
    pub inner_iter: usize,
    /// Relative residual of the conjugate-gradient `v`-update for `H1Squared`.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    operator_norm: f64,
}

impl AdmmConfig {
    pub fn new(rho: f64, operator_norm: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(MindError::InvalidParameter(format!("rho must be > 0, got {rho}")));
        }
        if !(operator_norm > 0.0 && operator_norm.is_finite()) {
            return Err(MindError::InvalidParameter(format!(
                "operator norm must be positive, got {operator_norm}"
            )));
        }
        Ok(Self {
            rho,
            max_iter: 3000,
            eps_stop: 1e-3,
            inner_iter: 50,
            cg_tol: 1e-10,
            cg_max_iter: 1000,
            operator_norm,
        })
    }

    /// `ρ = 1000` for `H1Squared`, `ρ = 1000/‖K‖²` for TV and Huber TV.
    pub fn default_rho(kind: RegularizerKind, operator_norm: f64) -> f64 {
        match kind {
            RegularizerKind::H1Squared => 1000.0,
            RegularizerKind::Tv | RegularizerKind::HuberTv { .. } => 1000.0 / (operator_norm * operator_norm),
        }
    }

    pub fn for_problem(p: &MindProblem) -> Result<Self> {
        let norm = p.dictionary().operator_norm(1e-9, 1000)?;
        let norm = norm.value * (1.0 + 1e-6);
        Self::new(Self::default_rho(p.regularizer().kind(), norm), norm)
    }

    pub fn operator_norm(&self) -> f64 {
        self.operator_norm
    }
}

/// Number of 4-neighbours of each pixel; the diagonal of the Neumann Laplacian.
pub(super) fn laplacian_diagonal(width: usize, height: usize) -> Vec<f64> {
    let mut d = vec![0.0; width * height];
    for r in 0..height {
        for c in 0..width {
            let mut k = 0.0;
            if c > 0 {
                k += 1.0;
            }
            if c + 1 < width {
                k += 1.0;
            }
            if r > 0 {
                k += 1.0;
            }
            if r + 1 < height {
                k += 1.0;
            }
            d[r * width + c] = k;
        }
    }
    d
}

/// ADMM on `R(v) + F(w)` subject to `Kv = w`:
///
/// ```text
/// v ← argmin R(v) + ρ/2·‖Kv − w + h/ρ‖²
/// w ← P_box(Kv + h/ρ)
/// h ← h + ρ(Kv − w)
/// ```
///
/// started from `v₀ = Y`, `w₀ = KY`, `h₀ = 0`. The `v`-update is a
/// preconditioned conjugate-gradient solve for `H1Squared` and a fixed budget
/// of accelerated proximal-gradient steps otherwise.
pub fn admm(p: &MindProblem, cfg: &AdmmConfig) -> Result<Solution> {
    if !(cfg.rho > 0.0) {
        return Err(MindError::InvalidParameter(format!("rho must be > 0, got {}", cfg.rho)));
    }
    let dict = p.dictionary();
    let reg = p.regularizer();
    let grid = p.data().grid();
    let (width, height) = (grid.width(), grid.height());
    let n = grid.n();
    let m = dict.element_count();
    let ky = p.data_coefficients();
    let q = p.q_n();
    let rho = cfg.rho;
    let scale = if q > 0.0 {
        q
    } else {
        ky.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(f64::MIN_POSITIVE)
    };

    let mut rec = Recorder::new("admm");
    let mut v = p.data().values().to_vec();
    let mut w = ky.to_vec();
    let mut h = vec![0.0; m];
    let mut kv = ky.to_vec();
    let mut kv_prev = ky.to_vec();
    let mut z = vec![0.0; m];
    let mut rhs = vec![0.0; n];

    let quadratic = matches!(reg.kind(), RegularizerKind::H1Squared);
    let precond = if quadratic {
        let mut d = vec![0.0; n];
        dict.weighted_normal_diagonal(&vec![1.0; m], &mut d);
        let lap = laplacian_diagonal(width, height);
        Some(d.iter().zip(&lap).map(|(a, b)| rho * a + b).collect::<Vec<_>>())
    } else {
        None
    };
    let mut coeff_buf = vec![0.0; m];
    let mut field = GradientField::zeros(width, height);
    let mut lap_buf = vec![0.0; n];
    let mut inner = InnerSolver::new(width, height, m);

    for _ in 0..cfg.max_iter {
        for j in 0..m {
            z[j] = w[j] - h[j] / rho;
        }
        let capped = if let Some(diag) = &precond {
            dict.adjoint_into(&z, &mut rhs);
            rhs.iter_mut().for_each(|r| *r *= rho);
            let out = conjugate_gradient(
                |x, out| {
                    dict.normal_into(x, &mut coeff_buf, out);
                    laplacian_into(x, width, height, &mut field, &mut lap_buf);
                    for (o, l) in out.iter_mut().zip(&lap_buf) {
                        *o = rho * *o + l;
                    }
                },
                &rhs,
                &mut v,
                Some(diag),
                cfg.cg_tol,
                cfg.cg_max_iter,
            );
            !out.converged
        } else {
            inner.solve(p, rho, cfg.operator_norm, &z, &mut v, cfg.inner_iter)
        };
        if capped {
            rec.inner_cap_hit();
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(MindError::NonFinite(i));
        }
        std::mem::swap(&mut kv, &mut kv_prev);
        dict.analyze_into(&v, &mut kv);
        let mut primal: f64 = 0.0;
        let mut change: f64 = 0.0;
        for j in 0..m {
            let t = kv[j] + h[j] / rho;
            w[j] = t.clamp(ky[j] - q, ky[j] + q);
            let r = kv[j] - w[j];
            h[j] += rho * r;
            primal = primal.max(r.abs());
            change = change.max((kv[j] - kv_prev[j]).abs());
        }
        let crit = primal.max(change);

        let current = Image::from_raw(grid, v.clone());
        let gap = p.relative_gap(p.residual_sup(&kv));
        rec.push(reg.value(&current), gap, &v, p.reference());
        if crit <= cfg.eps_stop * scale {
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

/// Inner solver for `min_v R(v) + ρ/2·‖Kv − z‖²`.
///
/// TV uses a primal-dual (Condat–Vũ) iteration on the dual field of `∇v`,
/// which is kept between outer iterations. Other non-quadratic regularizers
/// use accelerated proximal gradient with step `1/(ρ‖K‖²)`.
struct InnerSolver {
    state: ProxState,
    px: Vec<f64>,
    py: Vec<f64>,
    field: GradientField,
    x: Vec<f64>,
    y: Vec<f64>,
    arg: Vec<f64>,
    grad: Vec<f64>,
    coeffs: Vec<f64>,
}

impl InnerSolver {
    fn new(width: usize, height: usize, m: usize) -> Self {
        let n = width * height;
        Self {
            state: ProxState::new(width, height),
            px: vec![0.0; n],
            py: vec![0.0; n],
            field: GradientField::zeros(width, height),
            x: vec![0.0; n],
            y: vec![0.0; n],
            arg: vec![0.0; n],
            grad: vec![0.0; n],
            coeffs: vec![0.0; m],
        }
    }

    /// Runs from the warm start `v` and overwrites it. Returns true when the
    /// budget ran out before the iterates stalled.
    fn solve(&mut self, p: &MindProblem, rho: f64, k_norm: f64, z: &[f64], v: &mut [f64], budget: usize) -> bool {
        if matches!(p.regularizer().kind(), RegularizerKind::Tv) {
            return self.solve_tv(p, rho, k_norm, z, v, budget);
        }
        let dict = p.dictionary();
        let reg = p.regularizer();
        let grid = p.data().grid();
        let (width, height) = (grid.width(), grid.height());
        let s = 1.0 / (rho * k_norm * k_norm);
        self.x.copy_from_slice(v);
        self.y.copy_from_slice(v);
        let mut t = 1.0f64;
        for _ in 0..budget {
            dict.analyze_into(&self.y, &mut self.coeffs);
            for (c, zj) in self.coeffs.iter_mut().zip(z) {
                *c -= zj;
            }
            dict.adjoint_into(&self.coeffs, &mut self.grad);
            for i in 0..self.arg.len() {
                self.arg[i] = self.y[i] - s * rho * self.grad[i];
            }
            reg.prox_with_state(&self.arg, width, height, s, &mut self.state, v);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            let mut diff = 0.0;
            for i in 0..v.len() {
                let d = v[i] - self.x[i];
                diff += d * d;
                self.y[i] = v[i] + beta * d;
                self.x[i] = v[i];
            }
            t = t_next;
            if diff.sqrt() <= 1e-12 * norm(v).max(1.0) {
                return false;
            }
        }
        true
    }

    /// `v ← v − τ(ρK*(Kv − z) + ∇ᵀp)`, `p ← P_{|p|≤1}(p + σ∇(2v_new − v))`
    /// with `8σ = ρ‖K‖²/2` and `τ = 0.99/(ρ‖K‖²)`.
    fn solve_tv(&mut self, p: &MindProblem, rho: f64, k_norm: f64, z: &[f64], v: &mut [f64], budget: usize) -> bool {
        let dict = p.dictionary();
        let grid = p.data().grid();
        let (width, height) = (grid.width(), grid.height());
        let n = v.len();
        let lf = rho * k_norm * k_norm;
        let sigma = lf / 16.0;
        let tau = 0.99 / lf;
        let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for _ in 0..budget {
            dict.analyze_into(v, &mut self.coeffs);
            for (c, zj) in self.coeffs.iter_mut().zip(z) {
                *c = rho * (*c - zj);
            }
            dict.adjoint_into(&self.coeffs, &mut self.grad);
            gradient_adjoint_into(&self.px, &self.py, width, height, &mut self.arg);
            let mut change: f64 = 0.0;
            for i in 0..n {
                let next = v[i] - tau * (self.grad[i] + self.arg[i]);
                // extrapolated point 2v_new − v for the dual step
                self.y[i] = 2.0 * next - v[i];
                change = change.max((next - v[i]).abs());
                v[i] = next;
            }
            gradient_into(&self.y, width, height, &mut self.field);
            let mut dual_change: f64 = 0.0;
            for i in 0..n {
                let qx = self.px[i] + sigma * self.field.dx[i];
                let qy = self.py[i] + sigma * self.field.dy[i];
                let m = qx.hypot(qy).max(1.0);
                dual_change = dual_change.max((qx / m - self.px[i]).abs()).max((qy / m - self.py[i]).abs());
                self.px[i] = qx / m;
                self.py[i] = qy / m;
            }
            if change <= 1e-12 * scale && dual_change <= 1e-12 {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{Dictionary, DictionaryKind};
    use crate::image::ImageGrid;
    use crate::regularizer::Regularizer;

    #[test]
    fn constant_data_stops_immediately() {
        let grid = ImageGrid::new(8, 8).unwrap();
        let dict = Dictionary::build(grid, DictionaryKind::DyadicCubes { depth: None }).unwrap();
        let y = Image::constant(grid, 0.7);
        for reg in [Regularizer::h1_squared(), Regularizer::tv()] {
            let p = MindProblem::new(y.clone(), dict.clone(), reg, 0.01).unwrap();
            let cfg = AdmmConfig::for_problem(&p).unwrap();
            let sol = admm(&p, &cfg).unwrap();
            assert!(sol.report.converged);
            assert!(sol.report.iterations <= 2, "{}", sol.report.iterations);
            assert!(sol.report.final_objective().unwrap() < 1e-12);
        }
    }

    #[test]
    fn laplacian_diagonal_counts_neighbours() {
        assert_eq!(laplacian_diagonal(3, 2), vec![2.0, 3.0, 2.0, 2.0, 3.0, 2.0]);
    }

    #[test]
    fn rejects_bad_rho() {
        assert!(AdmmConfig::new(0.0, 1.0).is_err());
        assert!(AdmmConfig::new(1.0, f64::NAN).is_err());
    }
}
