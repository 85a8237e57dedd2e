use mind_core::solvers::{project_box, prox_f_star};
use mind_core::threshold::{empirical_quantile, estimate_sigma, monte_carlo_quantile, ms_statistic, ThresholdSpec};
use mind_core::{CoefficientVector, Dictionary, DictionaryKind, Image, ImageGrid, Regularizer, WaveletFilter};
use proptest::prelude::*;

fn kinds(w: usize, h: usize) -> Vec<DictionaryKind> {
    let mut out = vec![DictionaryKind::SmallCubes {
        max_edge: w.min(h).min(4),
    }];
    if w == h && w.is_power_of_two() {
        out.push(DictionaryKind::DyadicCubes { depth: None });
    }
    out.push(DictionaryKind::Wavelet {
        filter: WaveletFilter::Haar,
        depth: None,
    });
    out
}

fn grid_and_values() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(a, b)| {
        let (w, h) = (1 << a, 1 << b);
        (Just(w), Just(h), prop::collection::vec(-5.0f64..5.0, w * h))
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjoint_identity((w, h, v) in grid_and_values(), seed in any::<u64>()) {
        let grid = ImageGrid::new(w, h).unwrap();
        let img = Image::new(grid, v).unwrap();
        for kind in kinds(w, h) {
            let dict = Dictionary::build(grid, kind).unwrap();
            let m = dict.element_count();
            let c = CoefficientVector((0..m).map(|i| ((seed.wrapping_add(i as u64 * 7919)) % 1000) as f64 / 100.0 - 5.0).collect());
            let lhs = dict.analyze(&img).unwrap().dot(&c);
            let rhs = dot(img.values(), dict.adjoint(&c).unwrap().values());
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{kind:?}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn ms_statistic_is_a_seminorm((w, h, v) in grid_and_values(), a in -3.0f64..3.0, shift in prop::collection::vec(-1.0f64..1.0, 256)) {
        let grid = ImageGrid::new(w, h).unwrap();
        let r = Image::new(grid, v).unwrap();
        let s = Image::new(grid, shift[..w * h].to_vec()).unwrap();
        for kind in kinds(w, h) {
            let dict = Dictionary::build(grid, kind).unwrap();
            let base = ms_statistic(&dict, &r).unwrap();
            let scaled = ms_statistic(&dict, &r.map(|x| a * x)).unwrap();
            prop_assert!((scaled - a.abs() * base).abs() <= 1e-12 * (1.0 + base));
            let sum = ms_statistic(&dict, &r.add_scaled(&s, 1.0).unwrap()).unwrap();
            prop_assert!(sum <= base + ms_statistic(&dict, &s).unwrap() + 1e-12);
        }
    }

    #[test]
    fn moreau_decomposition_of_conjugate_prox(
        w in prop::collection::vec(-10.0f64..10.0, 1..20),
        ky_seed in prop::collection::vec(-2.0f64..2.0, 20),
        q in 0.0f64..3.0,
        delta in 0.01f64..100.0,
    ) {
        let ky = &ky_seed[..w.len()];
        let wv = CoefficientVector(w.clone());
        let p = prox_f_star(ky, q, &wv, delta).unwrap();
        let scaled = CoefficientVector(w.iter().map(|x| x / delta).collect());
        let b = project_box(ky, q, &scaled).unwrap();
        for j in 0..w.len() {
            let recon = p.0[j] + delta * b.0[j];
            prop_assert!((recon - w[j]).abs() <= 1e-12 * (1.0 + w[j].abs()));
        }
    }

    #[test]
    fn conjugate_prox_is_nonexpansive(
        a in prop::collection::vec(-10.0f64..10.0, 8),
        b in prop::collection::vec(-10.0f64..10.0, 8),
        ky in prop::collection::vec(-2.0f64..2.0, 8),
        q in 0.0f64..3.0,
        delta in 0.01f64..100.0,
    ) {
        let pa = prox_f_star(&ky, q, &CoefficientVector(a.clone()), delta).unwrap();
        let pb = prox_f_star(&ky, q, &CoefficientVector(b.clone()), delta).unwrap();
        let d_out: f64 = pa.0.iter().zip(&pb.0).map(|(x, y)| (x - y).powi(2)).sum();
        let d_in: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        prop_assert!(d_out <= d_in * (1.0 + 1e-12) + 1e-24);
    }

    #[test]
    fn quantile_is_monotone_in_probability(mut s in prop::collection::vec(-100.0f64..100.0, 1..50), p1 in 0.0f64..1.0, p2 in 0.0f64..1.0) {
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        let ql = empirical_quantile(&mut s, lo);
        let qh = empirical_quantile(&mut s, hi);
        prop_assert!(ql <= qh + 1e-12);
        prop_assert!(ql >= s[0] && qh <= s[s.len() - 1]);
    }

    #[test]
    fn sigma_estimate_is_affine_equivariant((w, h, v) in grid_and_values(), a in -4.0f64..4.0, b in -10.0f64..10.0, cx in -1.0f64..1.0, cy in -1.0f64..1.0) {
        prop_assume!(w >= 4 && h >= 4);
        let grid = ImageGrid::new(w, h).unwrap();
        let y = Image::new(grid, v).unwrap();
        let base = estimate_sigma(&y).unwrap().sigma_hat;
        let t: Vec<f64> = (0..w * h).map(|i| a * y.values()[i] + b + cx * (i % w) as f64 + cy * (i / w) as f64).collect();
        let got = estimate_sigma(&Image::new(grid, t).unwrap()).unwrap().sigma_hat;
        prop_assert!((got - a.abs() * base).abs() <= 1e-9 * (1.0 + base));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn regularizer_prox_is_nonexpansive(
        a in prop::collection::vec(0.0f64..1.0, 16),
        b in prop::collection::vec(0.0f64..1.0, 16),
        tau in 0.01f64..1.0,
        which in 0usize..2,
    ) {
        let grid = ImageGrid::new(4, 4).unwrap();
        let reg = if which == 0 {
            Regularizer::with_prox_settings(mind_core::RegularizerKind::Tv, 1e-10, 100_000).unwrap()
        } else {
            Regularizer::h1_squared()
        };
        let ia = Image::new(grid, a.clone()).unwrap();
        let ib = Image::new(grid, b.clone()).unwrap();
        let pa = reg.prox(&ia, tau).unwrap().image;
        let pb = reg.prox(&ib, tau).unwrap().image;
        let d_out = pa.add_scaled(&pb, -1.0).unwrap().l2_norm();
        let d_in = ia.add_scaled(&ib, -1.0).unwrap().l2_norm();
        prop_assert!(d_out <= d_in + 1e-6, "{d_out} > {d_in}");
        // the prox never increases the regularizer
        prop_assert!(reg.value(&pa) <= reg.value(&ia) + 1e-9);
    }
}

#[test]
fn quantile_is_exactly_homogeneous_in_sigma() {
    let grid = ImageGrid::new(16, 16).unwrap();
    let dict = Dictionary::build(grid, DictionaryKind::SmallCubes { max_edge: 4 }).unwrap();
    let unit = monte_carlo_quantile(&dict, &ThresholdSpec { reps: 200, ..ThresholdSpec::median(1.0, 9) }).unwrap();
    for s in [0.5, 2.0, 0.037] {
        let q = monte_carlo_quantile(&dict, &ThresholdSpec { reps: 200, ..ThresholdSpec::median(s, 9) }).unwrap();
        assert_eq!(q, s * unit);
    }
}
