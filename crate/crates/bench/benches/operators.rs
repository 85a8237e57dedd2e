use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mind_core::phantom::{generate, PhantomKind};
use mind_core::{
    add_noise, chambolle_pock, snr_to_sigma, CpConfig, Dictionary, DictionaryKind, Image, ImageGrid, MindProblem,
    NoiseSpec, Regularizer, WaveletFilter,
};

fn noisy(size: usize) -> Image {
    let f = generate(PhantomKind::Blocks, ImageGrid::new(size, size).unwrap()).unwrap();
    let sigma = snr_to_sigma(&f, 20.0).unwrap();
    add_noise(&f, &NoiseSpec::new(sigma, 1).unwrap()).unwrap()
}

fn kinds() -> [(&'static str, DictionaryKind); 3] {
    [
        ("dyadic", DictionaryKind::DyadicCubes { depth: None }),
        ("small-cubes-16", DictionaryKind::SmallCubes { max_edge: 16 }),
        (
            "sym6",
            DictionaryKind::Wavelet {
                filter: WaveletFilter::Symlet6,
                depth: None,
            },
        ),
    ]
}

fn analyze_adjoint(c: &mut Criterion) {
    let y = noisy(128);
    let mut group = c.benchmark_group("analyze+adjoint 128x128");
    for (name, kind) in kinds() {
        let dict = Dictionary::build(y.grid(), kind).unwrap();
        let coef = dict.analyze(&y).unwrap();
        group.bench_function(BenchmarkId::new("analyze", name), |b| b.iter(|| dict.analyze(black_box(&y)).unwrap()));
        group.bench_function(BenchmarkId::new("adjoint", name), |b| b.iter(|| dict.adjoint(black_box(&coef)).unwrap()));
    }
    group.finish();
}

fn tv_prox(c: &mut Criterion) {
    let reg = Regularizer::tv();
    let mut group = c.benchmark_group("tv prox");
    for size in [64, 128] {
        let y = noisy(size);
        group.bench_with_input(BenchmarkId::from_parameter(size), &y, |b, y| b.iter(|| reg.prox(black_box(y), 0.05).unwrap()));
    }
    group.finish();
}

fn cp_solve(c: &mut Criterion) {
    let y = noisy(32);
    let dict = Dictionary::build(y.grid(), DictionaryKind::DyadicCubes { depth: None }).unwrap();
    let q = 0.5 * dict.analyze(&y).unwrap().max_abs();
    let p = MindProblem::new(y, dict, Regularizer::h1_squared(), q).unwrap();
    let cfg = CpConfig::for_problem(&p).unwrap();
    let mut group = c.benchmark_group("chambolle-pock");
    group.sample_size(10);
    group.bench_function("h1 dyadic 32x32", |b| b.iter(|| chambolle_pock(black_box(&p), &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, analyze_adjoint, tv_prox, cp_solve);
criterion_main!(benches);
