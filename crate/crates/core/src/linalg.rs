//! Small dense-vector helpers and a preconditioned conjugate gradient solver.

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of [`conjugate_gradient`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// Final residual norm relative to `‖b‖`.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` for symmetric positive (semi)definite `A`, starting from `x`.
///
/// `apply(v, out)` writes `A v` into `out`. With `diag` given, Jacobi
/// preconditioning by its inverse is used. Stops at `‖r‖ ≤ tol·‖b‖`.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    diag: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let precond = |r: &[f64], z: &mut [f64]| match diag {
        Some(d) => z
            .iter_mut()
            .zip(r.iter().zip(d))
            .for_each(|(z, (r, d))| *z = if *d > 0.0 { r / d } else { *r }),
        None => z.copy_from_slice(r),
    };
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = norm(&r) / b_norm;
    let mut it = 0;
    while res > tol && it < max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
        it += 1;
        res = norm(&r) / b_norm;
        if res <= tol {
            break;
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    CgOutcome {
        iterations: it,
        relative_residual: res,
        converged: res <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, -1.0], [0.0, -1.0, 2.0]];
        let b = [1.0, 2.0, 3.0];
        let apply = |v: &[f64], out: &mut [f64]| {
            for i in 0..3 {
                out[i] = (0..3).map(|j| a[i][j] * v[j]).sum();
            }
        };
        for diag in [None, Some(&[4.0, 3.0, 2.0][..])] {
            let mut x = [0.0; 3];
            let out = conjugate_gradient(apply, &b, &mut x, diag, 1e-14, 50);
            assert!(out.converged);
            let mut ax = [0.0; 3];
            apply(&x, &mut ax);
            for i in 0..3 {
                assert!((ax[i] - b[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut x = [1.0, 2.0];
        let out = conjugate_gradient(|v, o| o.copy_from_slice(v), &[0.0, 0.0], &mut x, None, 1e-10, 10);
        assert!(out.converged);
        assert_eq!(x, [0.0, 0.0]);
    }
}
