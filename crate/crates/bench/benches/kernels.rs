use criterion::{black_box, criterion_group, criterion_main, Criterion};
use dislo_core::fixedpoint::{indicator, solve_nonlocal, DislocationProblem, SolveOptions};
use dislo_core::grid::{euclidean_norm, sample, Grid, ScalarField};
use dislo_core::hj::{cfl_dt, step, solve_local, LocalProblem, SignMode, DEFAULT_CFL};
use dislo_core::nonlocal::{Convolver, GaussianScale, Kernel, TimeSeries};

fn cone(g: &Grid) -> ScalarField {
    sample(g, |x| 1.0 - euclidean_norm(x)).unwrap()
}

fn bench_convolve(c: &mut Criterion) {
    let g = Grid::cube(2, -3.0, 3.0, 256).unwrap();
    let kernel = Kernel::gaussian(&g, 0.3, GaussianScale::Mass(0.5)).unwrap();
    let conv = Convolver::new(&g, &kernel).unwrap();
    let rho = indicator(&cone(&g), 2.0);
    c.bench_function("convolve_fft_256", |b| b.iter(|| conv.convolve(black_box(&rho), 0.0).unwrap()));
}

fn bench_step(c: &mut Criterion) {
    let g = Grid::cube(2, -3.0, 3.0, 256).unwrap();
    let u = cone(&g);
    let speed = ScalarField::constant(g, 1.0);
    let dt = cfl_dt(1.0, &g, DEFAULT_CFL);
    c.bench_function("upwind_step_256", |b| {
        b.iter(|| step(black_box(&u), &speed, dt, SignMode::Nonnegative).unwrap())
    });
}

fn bench_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    let g = Grid::cube(2, -3.0, 3.0, 128).unwrap();
    let speed = ScalarField::constant(g, 1.0);
    group.bench_function("local_128", |b| {
        b.iter(|| solve_local(&LocalProblem::new(cone(&g), &speed, 0.5), &[]).unwrap())
    });
    let g = Grid::cube(2, -3.0, 3.0, 96).unwrap();
    let kernel = Kernel::gaussian(&g, 0.3, GaussianScale::Mass(0.5)).unwrap();
    let problem =
        DislocationProblem::new(kernel, TimeSeries::steady(ScalarField::constant(g, 0.6)), cone(&g), 0.5, 1.0).unwrap();
    group.bench_function("nonlocal_96", |b| {
        b.iter(|| solve_nonlocal(&problem, &[], &SolveOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_convolve, bench_step, bench_solve);
criterion_main!(benches);
