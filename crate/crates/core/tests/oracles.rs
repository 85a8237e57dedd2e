//! Dense-matrix oracles for the dictionary operators, the multiscale statistic
//! and the constraint diagnostics.

use mind_core::solvers::kkt_diagnostics;
use mind_core::threshold::ms_statistic;
use mind_core::{CoefficientVector, Dictionary, DictionaryKind, Image, ImageGrid, MindProblem, Regularizer, WaveletFilter};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Squares as `(x0, y0, edge)`, one row of `K` each, entries `1/(e√n)` on the square.
fn cube_matrix(w: usize, h: usize, squares: &[(usize, usize, usize)]) -> DMatrix<f64> {
    let n = (w * h) as f64;
    let mut k = DMatrix::zeros(squares.len(), w * h);
    for (r, &(x0, y0, e)) in squares.iter().enumerate() {
        for y in y0..y0 + e {
            for x in x0..x0 + e {
                k[(r, y * w + x)] = 1.0 / (e as f64 * n.sqrt());
            }
        }
    }
    k
}

fn dyadic_squares(side: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut e = side;
    while e >= 1 {
        for iy in 0..side / e {
            for ix in 0..side / e {
                out.push((ix * e, iy * e, e));
            }
        }
        e /= 2;
    }
    out
}

fn small_squares(w: usize, h: usize, max_edge: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for e in 1..=max_edge {
        for y in 0..=h - e {
            for x in 0..=w - e {
                out.push((x, y, e));
            }
        }
    }
    out
}

/// 1-D Haar scaling (`detail = false`) or wavelet function of support `s` at `start`, sampled on `len` pixels.
fn haar_1d(len: usize, start: usize, s: usize, detail: bool) -> Vec<f64> {
    let amp = 1.0 / (s as f64).sqrt();
    let mut f = vec![0.0; len];
    for i in 0..s {
        f[start + i] = if detail && i >= s / 2 { -amp } else { amp };
    }
    f
}

/// Full-depth 2-D Haar analysis on a square grid, in the crate's coefficient order:
/// the scaling coefficient, then per level from coarse to fine the bands
/// (x-detail, y-detail, diagonal), each row-major.
fn haar_matrix(side: usize) -> DMatrix<f64> {
    let n = side * side;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let push = |rows: &mut Vec<Vec<f64>>, fx: &[f64], fy: &[f64]| {
        let mut r = vec![0.0; n];
        for y in 0..side {
            for x in 0..side {
                r[y * side + x] = fx[x] * fy[y] / (n as f64).sqrt();
            }
        }
        rows.push(r);
    };
    let whole = haar_1d(side, 0, side, false);
    push(&mut rows, &whole, &whole);
    let mut count = 1;
    while count < side {
        let s = side / count;
        for (dx, dy) in [(true, false), (false, true), (true, true)] {
            for iy in 0..count {
                for ix in 0..count {
                    let fx = haar_1d(side, ix * s, s, dx);
                    let fy = haar_1d(side, iy * s, s, dy);
                    push(&mut rows, &fx, &fy);
                }
            }
        }
        count *= 2;
    }
    DMatrix::from_fn(n, n, |r, c| rows[r][c])
}

fn random_image(grid: ImageGrid, rng: &mut ChaCha8Rng) -> Image {
    Image::new(grid, (0..grid.n()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn assert_analysis_matches(dict: &Dictionary, k: &DMatrix<f64>, seed: u64) {
    let grid = dict.grid();
    assert_eq!(dict.element_count(), k.nrows());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..5 {
        let g = random_image(grid, &mut rng);
        let got = dict.analyze(&g).unwrap();
        let want = k * DVector::from_column_slice(g.values());
        for (a, b) in got.as_slice().iter().zip(want.iter()) {
            assert!((a - b).abs() <= 1e-12, "analysis {a} vs dense {b}");
        }
        let c = CoefficientVector((0..k.nrows()).map(|_| rng.random_range(-1.0..1.0)).collect());
        let got = dict.adjoint(&c).unwrap();
        let want = k.transpose() * DVector::from_column_slice(c.as_slice());
        for (a, b) in got.values().iter().zip(want.iter()) {
            assert!((a - b).abs() <= 1e-12, "adjoint {a} vs dense {b}");
        }
    }
}

#[test]
fn dyadic_cubes_match_dense_matrix() {
    let grid = ImageGrid::new(8, 8).unwrap();
    let dict = Dictionary::build(grid, DictionaryKind::DyadicCubes { depth: None }).unwrap();
    assert_analysis_matches(&dict, &cube_matrix(8, 8, &dyadic_squares(8)), 1);
}

#[test]
fn small_cubes_match_dense_matrix_on_rectangle() {
    let grid = ImageGrid::new(7, 5).unwrap();
    let dict = Dictionary::build(grid, DictionaryKind::SmallCubes { max_edge: 3 }).unwrap();
    assert_analysis_matches(&dict, &cube_matrix(7, 5, &small_squares(7, 5, 3)), 2);
}

#[test]
fn haar_matches_closed_form_basis() {
    let grid = ImageGrid::new(8, 8).unwrap();
    let dict = Dictionary::build(
        grid,
        DictionaryKind::Wavelet {
            filter: WaveletFilter::Haar,
            depth: None,
        },
    )
    .unwrap();
    assert_analysis_matches(&dict, &haar_matrix(8), 3);
}

/// Dense `K` assembled column by column from `analyze` on unit images.
fn assembled(dict: &Dictionary) -> DMatrix<f64> {
    let grid = dict.grid();
    let n = grid.n();
    let mut k = DMatrix::zeros(dict.element_count(), n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let c = dict.analyze(&Image::new(grid, e).unwrap()).unwrap();
        k.column_mut(i).copy_from_slice(c.as_slice());
    }
    k
}

#[test]
fn symlet_analysis_is_scaled_orthogonal() {
    let grid = ImageGrid::new(16, 16).unwrap();
    for depth in [1, 2] {
        let dict = Dictionary::build(
            grid,
            DictionaryKind::Wavelet {
                filter: WaveletFilter::Symlet6,
                depth: Some(depth),
            },
        )
        .unwrap();
        let k = assembled(&dict);
        let gram = k.transpose() * &k;
        let target = DMatrix::<f64>::identity(256, 256) / 256.0;
        assert!((gram - target).amax() < 1e-12);
    }
}

#[test]
fn element_images_have_unit_mean_square() {
    let grid = ImageGrid::new(8, 8).unwrap();
    for kind in [
        DictionaryKind::DyadicCubes { depth: None },
        DictionaryKind::SmallCubes { max_edge: 4 },
        DictionaryKind::Wavelet {
            filter: WaveletFilter::Symlet6,
            depth: Some(1),
        },
    ] {
        let dict = Dictionary::build(grid, kind).unwrap();
        for idx in [0, dict.element_count() / 2, dict.element_count() - 1] {
            let phi = dict.element_image(idx).unwrap();
            let ms: f64 = phi.values().iter().map(|v| v * v).sum::<f64>() / 64.0;
            assert!((ms - 1.0).abs() < 1e-12, "{kind:?} element {idx}: {ms}");
        }
    }
}

#[test]
fn operator_norm_matches_dense_svd() {
    let grid = ImageGrid::new(8, 8).unwrap();
    for kind in [
        DictionaryKind::DyadicCubes { depth: None },
        DictionaryKind::SmallCubes { max_edge: 3 },
    ] {
        let dict = Dictionary::build(grid, kind).unwrap();
        let sv = assembled(&dict).singular_values().max();
        let est = dict.operator_norm(1e-12, 10_000).unwrap();
        assert!(est.value <= sv * (1.0 + 1e-12));
        assert!((est.value - sv).abs() <= 1e-6 * sv, "{kind:?}: {} vs {sv}", est.value);
    }
    let dict = Dictionary::build(
        grid,
        DictionaryKind::Wavelet {
            filter: WaveletFilter::Haar,
            depth: None,
        },
    )
    .unwrap();
    let est = dict.operator_norm(1e-12, 100).unwrap();
    assert!((est.value - 1.0 / 8.0).abs() < 1e-10);
}

#[test]
fn ms_statistic_is_dense_sup_norm() {
    let grid = ImageGrid::new(6, 6).unwrap();
    let dict = Dictionary::build(grid, DictionaryKind::SmallCubes { max_edge: 6 }).unwrap();
    let k = cube_matrix(6, 6, &small_squares(6, 6, 6));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let r = random_image(grid, &mut rng);
        let want = (&k * DVector::from_column_slice(r.values())).amax();
        let got = ms_statistic(&dict, &r).unwrap();
        assert!((got - want).abs() < 1e-14);
    }
}

#[test]
fn kkt_diagnostics_match_dense_residual() {
    let grid = ImageGrid::new(8, 8).unwrap();
    let dict = Dictionary::build(grid, DictionaryKind::DyadicCubes { depth: None }).unwrap();
    let k = cube_matrix(8, 8, &dyadic_squares(8));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let y = random_image(grid, &mut rng);
    let v = random_image(grid, &mut rng);
    let q = 0.05;
    let p = MindProblem::new(y.clone(), dict, Regularizer::h1_squared(), q).unwrap();
    let diff: Vec<f64> = v.values().iter().zip(y.values()).map(|(a, b)| a - b).collect();
    let sup = (&k * DVector::from_vec(diff)).amax();
    let rec = kkt_diagnostics(&p, &v).unwrap();
    assert!((rec.gap - (sup - q)).abs() < 1e-12, "{} vs {}", rec.gap, sup - q);
    assert!((rec.relative_gap - (sup - q) / q).abs() < 1e-10);
    assert_eq!(rec.feasible, sup <= q);
    assert!((rec.objective - Regularizer::h1_squared().value(&v)).abs() < 1e-12);
}
