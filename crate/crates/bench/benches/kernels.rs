//! Hot-path benchmarks: one explicit flow step, entropy production
//! assembly, the pointwise action prox, and a full small transport solve.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use hkflow::expr::Expr;
use hkflow::flow::{self, FlowKind};
use hkflow::transport::{self, SolverOpts, TransportKind, TransportProblem};
use hkflow::{diagnostics, DensityField, EntropyModel, Grid};

fn setup(n: usize) -> (Grid, EntropyModel, DensityField) {
    let grid = Grid::circle(n, 1.0).unwrap();
    let mut model = EntropyModel::log_potential(Expr::parse("cos(2*pi*x)").unwrap());
    model.normalize_equilibrium(&grid, 1.0).unwrap();
    let u = DensityField::from_fn(&grid, |x| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).cos())
        .unwrap();
    (grid, model, u)
}

fn bench_flow_step(c: &mut Criterion) {
    let (grid, model, u) = setup(256);
    c.bench_function("flow_step_spherical_n256", |b| {
        b.iter(|| {
            let out = flow::step(&model, &grid, black_box(&u), 1e-6, FlowKind::Spherical).unwrap();
            black_box(out.u.mass())
        })
    });
}

fn bench_production(c: &mut Criterion) {
    let (grid, model, u) = setup(256);
    c.bench_function("entropy_production_n256", |b| {
        b.iter(|| {
            diagnostics::entropy_production(&model, &grid, black_box(&u), FlowKind::Spherical)
                .unwrap()
        })
    });
}

fn bench_prox(c: &mut Criterion) {
    c.bench_function("action_prox_batch_4096", |b| {
        b.iter_batched(
            || {
                let mut rng = hkflow::seeded::SplitMix64::new(7);
                (0..4096)
                    .map(|_| {
                        (
                            rng.next_in(-1.0, 3.0),
                            rng.next_in(-2.0, 2.0),
                            rng.next_in(-2.0, 2.0),
                        )
                    })
                    .collect::<Vec<_>>()
            },
            |nodes| {
                let mut acc = 0.0;
                for (r, m, z) in nodes {
                    acc += transport::prox_point(r, m, z, 0.3).0;
                }
                black_box(acc)
            },
            BatchSize::SmallInput,
        )
    });
}

fn bench_transport_solve(c: &mut Criterion) {
    let grid = Grid::circle(64, 1.0).unwrap();
    let tau = 2.0 * std::f64::consts::PI;
    let rho0 = DensityField::from_fn(&grid, |x| 1.0 + 0.5 * (tau * x).cos())
        .unwrap()
        .normalized_to(1.0)
        .unwrap();
    let rho1 = DensityField::from_fn(&grid, |x| 1.0 - 0.5 * (tau * x).sin())
        .unwrap()
        .normalized_to(1.0)
        .unwrap();
    let mut group = c.benchmark_group("transport");
    group.sample_size(10);
    group.bench_function("hk_solve_n64_t24", |b| {
        b.iter(|| {
            let problem = TransportProblem::new(
                grid.clone(),
                rho0.clone(),
                rho1.clone(),
                TransportKind::HK,
                24,
                SolverOpts { tol: 1e-5, ..Default::default() },
            )
            .unwrap();
            black_box(transport::solve_dynamic(&problem).unwrap().distance_sq)
        })
    });
    group.finish();
}

criterion_group!(benches, bench_flow_step, bench_production, bench_prox, bench_transport_solve);
criterion_main!(benches);
