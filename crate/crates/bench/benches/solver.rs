use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use magmlmc::fem::{assemble_with_plan, magnetic_energy, solve, FePlan, MaterialField};
use magmlmc::mesh::{generate_polar_mesh, CoaxGeometry};
use magmlmc::problems::{CoaxProblem, FieldRegime, LevelProblem};
use magmlmc::random::substream;
use magmlmc::{HierarchySpec, Strategy, BENCHMARK_FREQUENCY_HZ, MU0};
use std::hint::black_box;
use std::sync::Arc;

fn spec() -> HierarchySpec {
    HierarchySpec { h0: 25.4e-3 / 6.0, delta: 0.5, levels: 3, strategy: Strategy::Remeshed }
}

fn mesh_generation(c: &mut Criterion) {
    let g = CoaxGeometry::nominal();
    let mut group = c.benchmark_group("mesh");
    for level in 0..3 {
        let h = spec().target_h(level);
        group.bench_with_input(BenchmarkId::from_parameter(level), &h, |b, &h| {
            b.iter(|| generate_polar_mesh(black_box(&g), h).unwrap())
        });
    }
    group.finish();
}

fn assembly_and_solve(c: &mut Criterion) {
    let g = CoaxGeometry::nominal();
    let mut mat = MaterialField::from_nu(vec![1.0 / MU0, 1.0 / MU0, 1.0 / (1000.0 * MU0)]);
    mat.j_stat[0] = 100.0 / (std::f64::consts::PI * g.r0 * g.r0);
    mat.sigma[2] = 58e6;
    let omega = 2.0 * std::f64::consts::PI * BENCHMARK_FREQUENCY_HZ;
    let mut group = c.benchmark_group("fem");
    for level in 0..3 {
        let mesh = generate_polar_mesh(&g, spec().target_h(level)).unwrap();
        let plan = Arc::new(FePlan::new(&mesh));
        group.bench_function(BenchmarkId::new("assemble", level), |b| {
            b.iter(|| assemble_with_plan(plan.clone(), &mesh, &mat, g.l_z).unwrap())
        });
        let system = assemble_with_plan(plan.clone(), &mesh, &mat, g.l_z).unwrap();
        group.bench_function(BenchmarkId::new("solve_static", level), |b| {
            b.iter(|| magnetic_energy(&system, &solve(&system, 0.0).unwrap()))
        });
        group.bench_function(BenchmarkId::new("solve_harmonic", level), |b| {
            b.iter(|| magnetic_energy(&system, &solve(&system, omega).unwrap()))
        });
    }
    group.finish();
}

fn level_samples(c: &mut Criterion) {
    let regimes = [
        ("static", FieldRegime::Static),
        ("harmonic", FieldRegime::Harmonic { frequency_hz: BENCHMARK_FREQUENCY_HZ }),
    ];
    let mut group = c.benchmark_group("sample");
    for (name, regime) in regimes {
        let problem = CoaxProblem::benchmark(regime, spec()).unwrap();
        for level in 0..2 {
            let mut i = 0;
            group.bench_function(BenchmarkId::new(name, level), |b| {
                b.iter(|| {
                    i += 1;
                    let y = problem.input_model().sample(&substream(7, level, i));
                    problem.evaluate(level, &y).unwrap()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, mesh_generation, assembly_and_solve, level_samples);
criterion_main!(benches);
