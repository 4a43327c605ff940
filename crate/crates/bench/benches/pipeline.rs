//! Hot paths of the toolkit: the local solver, the maximal sweep, one
//! stopping-time step, and the lattice A_p reduction.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use sparsegrad_core::{
    ap_constant, dyadic_maximal, iteration_step, make_coefficient, solve_dirichlet, CoeffSpec,
    Cube, FieldGen, Grid, GridField, Region, SolverConfig, SparseParams, Weight,
};

fn bench_solver(c: &mut Criterion) {
    let grid = Grid::new(2, 4).unwrap();
    let cfg = SolverConfig::for_grid(&grid);
    let gen = FieldGen::new(1);
    let f_vec = gen.fourier_vector(&grid, 6, FieldGen::default_band(&grid), 0);
    let zero = GridField::scalar(&grid);
    let region = Region::from_box(&grid, &Cube::root().triple_box(&grid));
    let mut group = c.benchmark_group("solver");
    for (name, spec) in [
        ("identity", CoeffSpec::Identity),
        (
            "checkerboard",
            CoeffSpec::Checkerboard {
                alpha: 1.0,
                beta: 4.0,
                period: 0.125,
            },
        ),
    ] {
        let coeff = make_coefficient(&grid, &spec).unwrap();
        group.bench_function(name, |b| {
            b.iter(|| {
                black_box(solve_dirichlet(&coeff, &region, &f_vec, &zero, &cfg).unwrap())
            })
        });
    }
    group.finish();
}

fn bench_maximal(c: &mut Criterion) {
    let grid = Grid::new(2, 5).unwrap();
    let gen = FieldGen::new(2);
    let h = gen.fourier_scalar(&grid, 6, FieldGen::default_band(&grid), 0);
    c.bench_function("dyadic_maximal_96", |b| {
        b.iter(|| black_box(dyadic_maximal(&h, Cube::root()).unwrap()))
    });
}

fn bench_iteration_step(c: &mut Criterion) {
    let grid = Grid::new(2, 4).unwrap();
    let cfg = SolverConfig::for_grid(&grid);
    let coeff = make_coefficient(
        &grid,
        &CoeffSpec::Checkerboard {
            alpha: 1.0,
            beta: 4.0,
            period: 0.125,
        },
    )
    .unwrap();
    let gen = FieldGen::new(3);
    let f_vec = gen.fourier_vector(&grid, 6, FieldGen::default_band(&grid), 0);
    let ones = GridField::constant(&grid, 1.0);
    let params = SparseParams {
        theta: 0.5,
        q_l: 2.0,
        q_h: 4.0,
        a_const: 0.6,
        b_const: 2.0,
        k_m: 0.12,
        a_source: "bench".into(),
        b_source: "bench".into(),
    };
    c.bench_function("iteration_step_48", |b| {
        b.iter(|| {
            black_box(
                iteration_step(
                    &coeff,
                    Cube::root(),
                    None,
                    &f_vec,
                    None,
                    &ones,
                    &params,
                    &cfg,
                    None,
                )
                .unwrap(),
            )
        })
    });
}

fn bench_weights(c: &mut Criterion) {
    let grid = Grid::new(2, 5).unwrap();
    let w = Weight::power(&grid, 0.5);
    c.bench_function("ap_constant_96", |b| {
        b.iter(|| black_box(ap_constant(w.field(), 2.0)))
    });
}

criterion_group!(
    benches,
    bench_solver,
    bench_maximal,
    bench_iteration_step,
    bench_weights
);
criterion_main!(benches);
