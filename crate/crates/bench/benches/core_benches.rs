use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use delaydiff_core::sweep::Axis;
use delaydiff_core::{
    char_quasipoly_affine, hs_spectral_radius, project_c0, roots_in_rect, solve, sweep_affine, BVMeasure, History,
    Rect, SweepConfig,
};
use nalgebra::DMatrix;

fn bench_solve(c: &mut Criterion) {
    let mu = BVMeasure::affine(0.5, 2.1);
    let mut group = c.benchmark_group("solve");
    for m in [64, 256] {
        let x0 = project_c0(&History::cosine(m, 127).unwrap(), &mu).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &x0, |b, x0| {
            b.iter(|| solve(black_box(&mu), x0, 20.0).unwrap())
        });
    }
    group.finish();
}

fn bench_roots(c: &mut Criterion) {
    let q = char_quasipoly_affine(-2.0, 0.0);
    let rect = Rect::new(-3.0, 2.0, 0.0, 30.0).unwrap();
    c.bench_function("roots_in_rect", |b| b.iter(|| roots_in_rect(black_box(&q), &rect, 0.05).unwrap()));
}

fn bench_sweep(c: &mut Criterion) {
    let axis = Axis { min: -4.0, max: 4.0, n: 11 };
    let config = SweepConfig { a: axis, b: axis, ..SweepConfig::default() };
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("affine_11x11", |b| b.iter(|| sweep_affine(black_box(&config)).unwrap()));
    group.finish();
}

fn bench_torus(c: &mut Criterion) {
    let coeffs = vec![
        DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.0, 0.2]),
        DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.1, 0.3]),
        DMatrix::from_row_slice(2, 2, &[-0.1, 0.2, 0.05, 0.1]),
    ];
    c.bench_function("hs_spectral_radius/3x64", |b| {
        b.iter(|| hs_spectral_radius(black_box(&coeffs), &[], 64).unwrap())
    });
}

criterion_group!(benches, bench_solve, bench_roots, bench_sweep, bench_torus);
criterion_main!(benches);
