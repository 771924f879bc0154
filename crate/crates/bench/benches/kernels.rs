use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use swirlmhd_core::elliptic::PoissonSolver;
use swirlmhd_core::evolve::{bump_axi_state, bump_reform_state, Amplitudes, Bump, Scheme, Stepper, StepperConfig};
use swirlmhd_core::exponents::epsilon_of_p;
use swirlmhd_core::grid::{Grid, Parity, ScalarField};
use swirlmhd_core::littlewood_paley::{besov_norm, leray_project, CartesianField3D};

const AMP: Amplitudes = Amplitudes {
    a_u: 1.0,
    a_b: 1.0,
    a_omega: 1.0,
};

fn grid(n: usize) -> Grid {
    Grid::new(n, n, 4.0, 8.0).unwrap()
}

fn poisson(c: &mut Criterion) {
    let mut group = c.benchmark_group("poisson_solve");
    for n in [64, 128, 256] {
        let g = grid(n);
        let solver = PoissonSolver::new(g).unwrap();
        let omega = ScalarField::from_fn(g, Parity::Odd, |r, z| r * (-r * r).exp() * (z * 0.785).sin());
        group.bench_with_input(BenchmarkId::from_parameter(n), &omega, |b, w| {
            b.iter(|| solver.biot_savart(black_box(w)).unwrap())
        });
    }
    group.finish();
}

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    let cfg = StepperConfig {
        dt: 0.005,
        scheme: Scheme::ImexEuler,
        cfl_safety: 0.9,
        t_end: 1.0,
        sample_every: 1,
    };
    let eps = epsilon_of_p(1.02).unwrap();
    for n in [64, 128] {
        let g = grid(n);
        let mut st = Stepper::new(g, cfg).unwrap();
        let bump = Bump::standard(&g);
        let axi = bump_axi_state(g, &bump, AMP, st.poisson()).unwrap();
        let reform = bump_reform_state(g, &bump, AMP, eps, st.poisson()).unwrap();
        // warm the factorization cache
        st.step_primitive(&axi).unwrap();
        st.step_reform(&reform).unwrap();
        group.bench_function(BenchmarkId::new("primitive", n), |b| {
            b.iter(|| st.step_primitive(black_box(&axi)).unwrap())
        });
        group.bench_function(BenchmarkId::new("reform", n), |b| {
            b.iter(|| st.step_reform(black_box(&reform)).unwrap())
        });
    }
    group.finish();
}

fn littlewood_paley(c: &mut Criterion) {
    let mut group = c.benchmark_group("littlewood_paley");
    group.sample_size(20);
    for n in [16, 32] {
        let u = CartesianField3D::from_fn(n, std::f64::consts::TAU, 3, |x, y, z| {
            [(x + 2.0 * y).cos(), (y - z).sin(), (3.0 * z).cos() * x.sin()]
        })
        .unwrap();
        group.bench_with_input(BenchmarkId::new("besov_inf_1", n), &u, |b, u| {
            b.iter(|| besov_norm(black_box(u), 1.0, f64::INFINITY, 1.0).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("leray", n), &u, |b, u| {
            b.iter(|| leray_project(black_box(u)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, poisson, step, littlewood_paley);
criterion_main!(benches);
