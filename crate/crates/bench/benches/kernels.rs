use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spdelab_core::grid::{
    assemble_operator, principal_eigenpair, CoefficientField, Grid, SpatialDomain,
};
use spdelab_core::integrator::{Scheme, SchemeConfig, Workspace};
use spdelab_core::noise::{factor_covariance, JumpMeasure, KernelSpec, LevySpec, RngStream};
use spdelab_core::{Problem, ScenarioSpec};

const BALL: &str = include_str!("../../cli/scenarios/example_4_1.toml");

fn eigenpair(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigenpair");
    for n in [100, 400, 1600] {
        group.bench_with_input(BenchmarkId::new("ball", n), &n, |b, &n| {
            b.iter(|| {
                let domain = SpatialDomain::Ball3dRadial { radius: 1.0 };
                let (g, op) = assemble_operator(&domain, &CoefficientField::default(), n).unwrap();
                black_box(principal_eigenpair(&op, &g).unwrap().lambda1)
            })
        });
    }
    group.finish();
}

fn step(c: &mut Criterion) {
    let spec = ScenarioSpec::from_toml(BALL).unwrap();
    let p = Problem::assemble(&spec).unwrap();
    let scheme = Scheme::new(&p, SchemeConfig::from_section(&spec.integration)).unwrap();
    let mut ws = Workspace::new(p.grid.len());
    c.bench_function("step/example_ball_200", |b| {
        b.iter_batched(
            || scheme.initial_state(RngStream::new(1, 0)),
            |mut state| {
                for _ in 0..10 {
                    black_box(scheme.step(&mut state, &mut ws).unwrap());
                }
                state
            },
            criterion::BatchSize::SmallInput,
        )
    });
}

fn noise(c: &mut Criterion) {
    let grid = Grid::new(&SpatialDomain::Interval { length: 1.0 }, 200).unwrap();
    let cov = factor_covariance(
        &KernelSpec::Gaussian {
            b0: 1.0,
            length: 0.2,
        },
        &grid,
    )
    .unwrap();
    let mut rng = RngStream::new(3, 0);
    let (mut xi, mut out) = (Vec::new(), vec![0.0; grid.len()]);
    c.bench_function("noise/wiener_200", |b| {
        b.iter(|| {
            cov.sample_into(1e-3, &mut rng, &mut xi, &mut out);
            black_box(out[0])
        })
    });
    let jm = JumpMeasure::new(
        LevySpec::Exponential {
            mass: 50.0,
            rate: 1.0,
        },
        None,
        None,
    )
    .unwrap();
    let mut marks = Vec::new();
    c.bench_function("noise/jumps", |b| {
        b.iter(|| {
            jm.sample_into(1e-2, &mut rng, &mut marks);
            black_box(marks.len())
        })
    });
}

criterion_group!(benches, eigenpair, step, noise);
criterion_main!(benches);
