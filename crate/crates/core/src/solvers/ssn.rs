use serde::{Deserialize, Serialize};

use super::report::{Recorder, Solution, SsnStage};
use super::MindProblem;
use crate::error::{MindError, Result};
use crate::image::Image;
use crate::linalg::{conjugate_gradient, norm};
use crate::regularizer::{gradient_into, GradientField, RegularizerKind};

/// Continuation schedule and tolerances of the semismooth Newton solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsnConfig {
    pub delta_init: f64,
    /// `δ ← δ·delta_factor` between stages.
    pub delta_factor: f64,
    /// Continuation ends once `δ` would drop below this.
    pub delta_min: f64,
    /// Allowed fraction of violated one-sided constraints.
    pub rho_min: f64,
    /// Allowed `‖max(0, Bv − BY − q_n)‖ / ‖v‖`.
    pub r_min: f64,
    /// A stage ends once `‖T_δ(v)‖` drops by this factor.
    pub newton_tol: f64,
    pub max_newton_per_stage: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for SsnConfig {
    fn default() -> Self {
        Self {
            delta_init: 1.0 / 3.0,
            delta_factor: 1.0 / 3.0,
            delta_min: 1e-10,
            rho_min: 0.05,
            r_min: 1e-7,
            newton_tol: 1e-9,
            max_newton_per_stage: 50,
            cg_tol: 1e-10,
            cg_max_iter: 2000,
        }
    }
}

impl SsnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MindError::InvalidParameter(m));
        if !(self.delta_init > 0.0 && self.delta_init.is_finite()) {
            return bad(format!("delta_init must be > 0, got {}", self.delta_init));
        }
        if !(self.delta_factor > 0.0 && self.delta_factor < 1.0) {
            return bad(format!("delta_factor must lie in (0, 1), got {}", self.delta_factor));
        }
        if !(self.delta_min > 0.0 && self.delta_min <= self.delta_init) {
            return bad(format!("delta_min must lie in (0, delta_init], got {}", self.delta_min));
        }
        if !(self.rho_min >= 0.0 && self.r_min >= 0.0 && self.newton_tol > 0.0 && self.cg_tol > 0.0) {
            return bad("tolerances must be non-negative".into());
        }
        if self.max_newton_per_stage == 0 {
            return bad("max_newton_per_stage must be >= 1".into());
        }
        Ok(())
    }
}

/// Number of consecutive residual increases treated as divergence.
const DIVERGENCE_RUN: usize = 10;

struct Violation {
    /// `max(0, Kv − KY − q) − max(0, KY − Kv − q)`, the signed violation.
    signed: Vec<f64>,
    /// 1 where either one-sided constraint is violated.
    active: Vec<f64>,
    count: usize,
    sup: f64,
}

fn violation(kv: &[f64], ky: &[f64], q: f64) -> Violation {
    let m = kv.len();
    let mut signed = vec![0.0; m];
    let mut active = vec![0.0; m];
    let mut count = 0;
    let mut sup = 0.0f64;
    for j in 0..m {
        let d = kv[j] - ky[j];
        sup = sup.max(d.abs());
        if d - q > 0.0 {
            signed[j] = d - q;
            active[j] = 1.0;
            count += 1;
        } else if -d - q > 0.0 {
            signed[j] = d + q;
            active[j] = 1.0;
            count += 1;
        }
    }
    Violation {
        signed,
        active,
        count,
        sup,
    }
}

/// Semismooth Newton with path continuation on the Moreau–Yosida penalized
/// system `T_δ(v) = ∇R(v) + δ⁻¹·Bᵀmax(0, Bv − BY − q_n) = 0`, `B = [K; −K]`.
///
/// Each stage runs generalized Newton steps at fixed `δ` until Newton has
/// converged. Continuation stops at the first stage whose end point meets
/// both violation criteria (`ratio ≤ rho_min`, `res ≤ r_min`), or once `δ`
/// would reach `delta_min`. Only smooth regularizers are supported.
pub fn semismooth_newton(p: &MindProblem, cfg: &SsnConfig) -> Result<Solution> {
    cfg.validate()?;
    let reg = p.regularizer();
    let hess_scale = match reg.kind() {
        RegularizerKind::Tv => return Err(MindError::UnsupportedRegularizer("tv")),
        RegularizerKind::H1Squared => 1.0,
        RegularizerKind::HuberTv { beta } => 2.0 / beta,
    };
    let dict = p.dictionary();
    let grid = p.data().grid();
    let (width, height) = (grid.width(), grid.height());
    let n = grid.n();
    let m = dict.element_count();
    let ky = p.data_coefficients();
    let q = p.q_n();
    let constraints = 2 * m;

    let mut rec = Recorder::new("semismooth-newton");
    let mut v = p.data().values().to_vec();
    let mut kv = ky.to_vec();
    let mut field = GradientField::zeros(width, height);
    let mut work = GradientField::zeros(width, height);
    let mut grad_r = vec![0.0; n];
    let mut t_vec = vec![0.0; n];
    let mut ktv = vec![0.0; n];
    let mut coeff_buf = vec![0.0; m];
    let mut hess_buf = vec![0.0; n];
    let mut step = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut kdiag = vec![0.0; n];
    let lap_diag = super::admm::laplacian_diagonal(width, height);

    let mut dual = GradientField::zeros(width, height);
    // T_δ(v) into `t`; leaves ∇v in `field` for the Hessian
    let mut residual = |v: &[f64], kv: &[f64], delta: f64, field: &mut GradientField, t: &mut [f64]| -> Result<Violation> {
        gradient_into(v, width, height, field);
        dual.dx.copy_from_slice(&field.dx);
        dual.dy.copy_from_slice(&field.dy);
        reg.gradient_from_field(&mut dual, &mut grad_r)?;
        let viol = violation(kv, ky, q);
        dict.adjoint_into(&viol.signed, &mut ktv);
        for i in 0..n {
            t[i] = grad_r[i] + ktv[i] / delta;
        }
        Ok(viol)
    };

    let mut delta = cfg.delta_init;
    let mut satisfied = false;
    loop {
        let mut viol = residual(&v, &kv, delta, &mut field, &mut t_vec)?;
        let mut res_trace = vec![norm(&t_vec)];
        let start_res = res_trace[0];
        let mut prev_active = viol.active.clone();
        let mut increases = 0;
        let mut linear_iterations = 0;
        let mut newton_converged = start_res == 0.0;
        let mut steps = 0;
        while !newton_converged && steps < cfg.max_newton_per_stage {
            steps += 1;
            // Jacobian at v: ∇²R(v) + δ⁻¹K*DK + εI; `field` holds ∇v from the residual evaluation
            dict.weighted_normal_diagonal(&viol.active, &mut kdiag);
            let mut diag: Vec<f64> = (0..n).map(|i| hess_scale * lap_diag[i] + kdiag[i] / delta).collect();
            let mean = diag.iter().sum::<f64>() / n as f64;
            let eps = 1e-12 * mean.max(f64::MIN_POSITIVE);
            diag.iter_mut().for_each(|d| *d += eps);
            for i in 0..n {
                rhs[i] = -t_vec[i];
            }
            step.iter_mut().for_each(|s| *s = 0.0);
            let active = &viol.active;
            let at = &field;
            let cg = conjugate_gradient(
                |u, out| {
                    reg.hessian_apply(at, u, &mut work, &mut hess_buf).expect("smooth regularizer");
                    dict.analyze_into(u, &mut coeff_buf);
                    for (c, a) in coeff_buf.iter_mut().zip(active) {
                        *c *= a;
                    }
                    dict.adjoint_into(&coeff_buf, out);
                    for i in 0..out.len() {
                        out[i] = hess_buf[i] + out[i] / delta + eps * u[i];
                    }
                },
                &rhs,
                &mut step,
                Some(&diag),
                cfg.cg_tol,
                cfg.cg_max_iter,
            );
            linear_iterations += cg.iterations;
            if !cg.converged {
                rec.inner_cap_hit();
            }
            for i in 0..n {
                v[i] += step[i];
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(MindError::NonFinite(i));
            }
            dict.analyze_into(&v, &mut kv);
            viol = residual(&v, &kv, delta, &mut field, &mut t_vec)?;
            let r = norm(&t_vec);
            if r > *res_trace.last().unwrap() {
                increases += 1;
                if increases >= DIVERGENCE_RUN {
                    return Err(MindError::NewtonDiverged {
                        delta,
                        message: format!(
                            "residual grew for {DIVERGENCE_RUN} consecutive steps (now {r:e}); restart with a larger delta"
                        ),
                    });
                }
            } else {
                increases = 0;
            }
            res_trace.push(r);
            rec.push(
                reg.value(&Image::from_raw(grid, v.clone())),
                p.relative_gap(viol.sup),
                &v,
                p.reference(),
            );
            // the step was computed with `prev_active`; if it is still the active set, the step
            // solved the piecewise-linear system up to the linear-solve tolerance
            let stable = viol.active == prev_active;
            newton_converged = r <= cfg.newton_tol * start_res || (stable && r <= cfg.newton_tol.sqrt() * start_res);
            prev_active.clone_from(&viol.active);
        }
        let ratio = viol.count as f64 / constraints as f64;
        let res = norm(&viol.signed) / norm(&v).max(f64::MIN_POSITIVE);
        rec.stage(SsnStage {
            delta,
            newton_residuals: res_trace,
            violated_ratio: ratio,
            violation_residual: res,
            relative_gap: p.relative_gap(viol.sup),
            linear_iterations,
        });
        if ratio <= cfg.rho_min && res <= cfg.r_min {
            satisfied = true;
            break;
        }
        let next = delta * cfg.delta_factor;
        if next <= cfg.delta_min {
            break;
        }
        delta = next;
    }
    let it = rec.iterations();
    let message = if satisfied {
        format!("violation criteria met at delta={delta:e} after {it} Newton steps")
    } else {
        format!("continuation reached delta_min at delta={delta:e} with violation criteria unmet")
    };
    Ok(Solution {
        estimate: Image::from_raw(grid, v),
        report: rec.finish(satisfied, message),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{Dictionary, DictionaryKind};
    use crate::image::ImageGrid;
    use crate::regularizer::Regularizer;

    #[test]
    fn tv_is_rejected() {
        let grid = ImageGrid::new(4, 4).unwrap();
        let dict = Dictionary::build(grid, DictionaryKind::DyadicCubes { depth: None }).unwrap();
        let p = MindProblem::new(Image::zeros(grid), dict, Regularizer::tv(), 0.1).unwrap();
        assert!(matches!(
            semismooth_newton(&p, &SsnConfig::default()),
            Err(MindError::UnsupportedRegularizer(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SsnConfig::default().validate().is_ok());
        let c = SsnConfig {
            delta_factor: 1.5,
            ..SsnConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn violation_is_signed() {
        let v = violation(&[1.0, -1.0, 0.05], &[0.0, 0.0, 0.0], 0.1);
        assert_eq!(v.count, 2);
        assert!((v.signed[0] - 0.9).abs() < 1e-15);
        assert!((v.signed[1] + 0.9).abs() < 1e-15);
        assert_eq!(v.signed[2], 0.0);
    }
}
