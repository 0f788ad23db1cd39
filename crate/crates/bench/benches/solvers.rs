use std::sync::Arc;

use cforge_bench::{benchmark_data, bumpy, grid, lich_problem, smooth, SIZES};
use cforge_core::coupled::{map_t, SolverSettings};
use cforge_core::lichnerowicz::{self, LichConfig};
use cforge_core::ops::centered_gradient;
use cforge_core::vector::{assemble_rhs, solve_vector, VectorConfig, VectorProblem};
use cforge_core::{half_lstar_l, laplace_beltrami, ScalarField};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn operators(c: &mut Criterion) {
    let mut group = c.benchmark_group("operators");
    for n in SIZES {
        let m = bumpy(n);
        let u = smooth(grid(n));
        let w = centered_gradient(&u);
        group.bench_with_input(BenchmarkId::new("laplace_beltrami", n), &n, |b, _| {
            b.iter(|| laplace_beltrami(&m, &u).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("half_lstar_l", n), &n, |b, _| {
            b.iter(|| half_lstar_l(&m, &w).unwrap())
        });
    }
    group.finish();
}

fn lichnerowicz_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("lichnerowicz_solve");
    group.sample_size(10);
    for n in SIZES {
        let p = lich_problem(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| lichnerowicz::solve(&p, &LichConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn vector_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("vector_solve");
    group.sample_size(10);
    for n in SIZES {
        let m = bumpy(n);
        let g = grid(n);
        let xi = centered_gradient(&smooth(g));
        let rhs = assemble_rhs(&m, &ScalarField::constant(g, 1.0), &xi).unwrap();
        let p = VectorProblem::new(m.clone(), rhs, Arc::from(Vec::new())).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| solve_vector(&p, &VectorConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn map_t_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("map_t");
    group.sample_size(10);
    for n in SIZES {
        let d = benchmark_data(n);
        let phi = ScalarField::constant(grid(n), 0.8);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| map_t(&d, &phi, &SolverSettings::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    operators,
    lichnerowicz_solve,
    vector_solve,
    map_t_bench
);
criterion_main!(benches);
