//! Solvers for `min R(g)` subject to `max_λ |⟨φ_λ, g − Y⟩| ≤ q_n`.
//!
//! In operator form the problem is `min_v F(Kv) + G(v)` with `G = R` and
//! `F` the indicator of the box `{w : ‖w − KY‖_∞ ≤ q_n}`. Three engines are
//! provided:
//!
//! * [`chambolle_pock`]: primal-dual iteration; the dual step is the exact
//!   prox of `F*`, a soft-thresholding ([`prox_f_star`]);
//! * [`admm`]: alternating minimization of the augmented Lagrangian; the
//!   slack step is the exact box projection ([`project_box`]);
//! * [`semismooth_newton`]: generalized Newton on the Moreau–Yosida
//!   regularized optimality system with path continuation in `δ`.
//!
//! All solvers start from `v₀ = Y` and record one [`SolveReport`] trace entry
//! per outer iteration.

mod admm;
mod chambolle_pock;
mod report;
mod ssn;

use serde::{Deserialize, Serialize};

pub use admm::{admm, AdmmConfig};
pub use chambolle_pock::{chambolle_pock, CpConfig, DEFAULT_STEP_BALANCE};
pub use report::{Solution, SolveReport, SsnStage};
pub use ssn::{semismooth_newton, SsnConfig};

use crate::dictionary::{CoefficientVector, Dictionary};
use crate::error::{MindError, Result};
use crate::image::Image;
use crate::regularizer::Regularizer;

/// The data `Y`, dictionary, regularizer and threshold that define one estimate.
#[derive(Debug, Clone)]
pub struct MindProblem {
    y: Image,
    dict: Dictionary,
    reg: Regularizer,
    q_n: f64,
    ky: Vec<f64>,
    reference: Option<Image>,
}

impl MindProblem {
    pub fn new(y: Image, dict: Dictionary, reg: Regularizer, q_n: f64) -> Result<Self> {
        dict.grid().check_same(&y.grid())?;
        if !(q_n >= 0.0 && q_n.is_finite()) {
            return Err(MindError::InvalidParameter(format!("q_n must be finite and >= 0, got {q_n}")));
        }
        let ky = dict.analyze(&y)?.0;
        Ok(Self {
            y,
            dict,
            reg,
            q_n,
            ky,
            reference: None,
        })
    }

    /// Attaches a long-run reference solution; solvers then trace `‖g_k − g_∞‖`.
    pub fn with_reference(mut self, reference: Image) -> Result<Self> {
        self.y.grid().check_same(&reference.grid())?;
        self.reference = Some(reference);
        Ok(self)
    }

    pub fn data(&self) -> &Image {
        &self.y
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.reg
    }

    pub fn q_n(&self) -> f64 {
        self.q_n
    }

    /// Analysis coefficients of the data, `KY`.
    pub fn data_coefficients(&self) -> &[f64] {
        &self.ky
    }

    pub fn reference(&self) -> Option<&Image> {
        self.reference.as_ref()
    }

    /// `max_λ |[K v]_λ − [KY]_λ|` given `Kv`.
    pub(crate) fn residual_sup(&self, kv: &[f64]) -> f64 {
        kv.iter().zip(&self.ky).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()))
    }

    /// Relative constraint gap `(sup − q_n)/q_n`.
    ///
    /// With `q_n = 0` the gap is normalized by `max(‖KY‖_∞, 1e-300)` instead.
    pub(crate) fn relative_gap(&self, sup: f64) -> f64 {
        if self.q_n > 0.0 {
            (sup - self.q_n) / self.q_n
        } else {
            let scale = self.ky.iter().fold(0.0, |m: f64, v| m.max(v.abs())).max(1e-300);
            sup / scale
        }
    }
}

/// `prox_{δF*}(w) = w − δ·clip(w/δ; KY − q_n, KY + q_n)`, componentwise.
///
/// By the Moreau decomposition this equals the soft-thresholding
/// `S_{δq_n}(w − δ·KY)`.
pub fn prox_f_star(ky: &[f64], q_n: f64, w: &CoefficientVector, delta: f64) -> Result<CoefficientVector> {
    if w.len() != ky.len() {
        return Err(MindError::LengthMismatch {
            expected: ky.len(),
            got: w.len(),
        });
    }
    if !(delta > 0.0) {
        return Err(MindError::InvalidParameter(format!("delta must be > 0, got {delta}")));
    }
    let mut out = w.0.clone();
    prox_f_star_in_place(ky, q_n, delta, &mut out);
    Ok(CoefficientVector(out))
}

pub(crate) fn prox_f_star_in_place(ky: &[f64], q_n: f64, delta: f64, w: &mut [f64]) {
    for (wi, &c) in w.iter_mut().zip(ky) {
        let clipped = (*wi / delta).clamp(c - q_n, c + q_n);
        *wi -= delta * clipped;
    }
}

/// Orthogonal projection onto `{w : ‖w − KY‖_∞ ≤ q_n}` (componentwise clipping).
pub fn project_box(ky: &[f64], q_n: f64, w: &CoefficientVector) -> Result<CoefficientVector> {
    if w.len() != ky.len() {
        return Err(MindError::LengthMismatch {
            expected: ky.len(),
            got: w.len(),
        });
    }
    Ok(CoefficientVector(
        w.0.iter().zip(ky).map(|(&x, &c)| x.clamp(c - q_n, c + q_n)).collect(),
    ))
}

/// Optimality and feasibility summary of a candidate `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktRecord {
    pub objective: f64,
    /// `max_λ |⟨φ_λ, v − Y⟩| − q_n`.
    pub gap: f64,
    pub relative_gap: f64,
    pub feasible: bool,
}

pub fn kkt_diagnostics(p: &MindProblem, v: &Image) -> Result<KktRecord> {
    let kv = p.dict.analyze(v)?;
    let sup = p.residual_sup(&kv.0);
    let gap = sup - p.q_n;
    Ok(KktRecord {
        objective: p.reg.value(v),
        gap,
        relative_gap: p.relative_gap(sup),
        feasible: gap <= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::DictionaryKind;
    use crate::image::ImageGrid;

    #[test]
    fn prox_f_star_scalar_examples() {
        let ky = [0.0];
        let f = |w: f64| prox_f_star(&ky, 1.0, &CoefficientVector(vec![w]), 1.0).unwrap().0[0];
        assert_eq!(f(3.0), 2.0);
        assert_eq!(f(0.5), 0.0);
        assert_eq!(f(-3.0), -2.0);
        assert!(prox_f_star(&ky, 1.0, &CoefficientVector(vec![1.0, 2.0]), 1.0).is_err());
        assert!(prox_f_star(&ky, 1.0, &CoefficientVector(vec![1.0]), 0.0).is_err());
    }

    #[test]
    fn box_projection_clips_single_violation() {
        let ky = [0.5, -1.0, 2.0];
        let q = 0.25;
        let w = CoefficientVector(vec![0.5, -1.0 + 2.0 * q, 2.0]);
        let p = project_box(&ky, q, &w).unwrap();
        assert_eq!(p.0, vec![0.5, -1.0 + q, 2.0]);
    }

    #[test]
    fn kkt_at_data_and_constructed_violation() {
        let grid = ImageGrid::new(4, 4).unwrap();
        let dict = Dictionary::build(grid, DictionaryKind::SmallCubes { max_edge: 1 }).unwrap();
        let y = Image::from_fn(grid, |x, y| x + y * y).unwrap();
        let q = 0.01;
        let p = MindProblem::new(y.clone(), dict, Regularizer::tv(), q).unwrap();
        let k = kkt_diagnostics(&p, &y).unwrap();
        assert_eq!(k.gap, -q);
        assert_eq!(k.relative_gap, -1.0);
        assert!(k.feasible);
        // pixel element coefficient is value / sqrt(n) = value / 4; exceed by q_n
        let mut bumped = y.values().to_vec();
        bumped[5] += 4.0 * 2.0 * q;
        let v = Image::new(grid, bumped).unwrap();
        let k = kkt_diagnostics(&p, &v).unwrap();
        assert!((k.relative_gap - 1.0).abs() < 1e-12);
        assert!(!k.feasible);
    }

    #[test]
    fn problem_validation() {
        let grid = ImageGrid::new(4, 4).unwrap();
        let dict = Dictionary::build(grid, DictionaryKind::DyadicCubes { depth: None }).unwrap();
        let y = Image::zeros(grid);
        assert!(MindProblem::new(y.clone(), dict.clone(), Regularizer::tv(), -1.0).is_err());
        let other = Image::zeros(ImageGrid::new(2, 2).unwrap());
        assert!(MindProblem::new(other, dict, Regularizer::tv(), 0.1).is_err());
    }
}
