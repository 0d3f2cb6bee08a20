use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use projlab_core::projective::{self, ConformalFamily};
use projlab_core::samples;
use projlab_core::{riemannian, solvers, TorusGrid};

fn spectral_derivative(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral_derivative");
    for (dim, n) in [(2, 64), (3, 32)] {
        let grid = TorusGrid::new(dim, n).unwrap();
        let u = samples::random_scalar(&grid, 1, 2, 1.0);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{dim}d_n{n}")), &u, |b, u| {
            b.iter(|| grid.diff(black_box(u.values()), 0).unwrap())
        });
    }
    group.finish();
}

fn curvature(c: &mut Criterion) {
    let grid = TorusGrid::new(3, 16).unwrap();
    let s = samples::random_structure(&grid, 2, 0.3);
    c.bench_function("curvature_3d_n16", |b| b.iter(|| riemannian::curvature(black_box(s.representative())).unwrap()));
}

fn energy(c: &mut Criterion) {
    let grid = TorusGrid::new(3, 16).unwrap();
    let g = samples::random_metric(&grid, 3, 0.2);
    let s = samples::random_structure(&grid, 4, 0.3);
    c.bench_function("energy_3d_n16", |b| b.iter(|| projective::energy(black_box(&s), &g).unwrap()));
    let family = ConformalFamily::new(&s, &g).unwrap();
    let f = samples::random_scalar(&grid, 5, 1, 0.2);
    c.bench_function("conformal_sample_3d_n16", |b| b.iter(|| family.sample(black_box(&f)).unwrap()));
}

fn solvers(c: &mut Criterion) {
    let grid = TorusGrid::new(2, 32).unwrap();
    let g = samples::random_metric(&grid, 6, 0.2);
    let s = samples::random_structure(&grid, 7, 0.3);
    c.bench_function("poisson_2d_n32", |b| {
        b.iter(|| solvers::solve_conformal_critical_2d(black_box(&s), &g, 1e-8).unwrap())
    });
    let grid = TorusGrid::new(3, 8).unwrap();
    let g = samples::random_metric(&grid, 8, 0.2);
    let s = samples::random_structure(&grid, 9, 0.3);
    c.bench_function("spectrum_3d_n8", |b| b.iter(|| solvers::spectrum_lower_bound(black_box(&s), &g, 1).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = spectral_derivative, curvature, energy, solvers
}
criterion_main!(benches);
