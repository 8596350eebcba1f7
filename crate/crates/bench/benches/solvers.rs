use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use setflow_bench::{brittle_disc, tiny};
use setflow_core::geometry::PerimeterScheme;
use setflow_core::grid_solver::{brute_force_step, single_step, SolveParams};
use setflow_core::profile::{solve_profile, Obstacle, ProfileParams};

fn grid_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("single_step");
    g.sample_size(10);
    for scheme in [PerimeterScheme::Anisotropic, PerimeterScheme::Isotropic, PerimeterScheme::Crofton] {
        for n in [32, 64, 128] {
            let p = brittle_disc(n, scheme);
            g.bench_with_input(BenchmarkId::new(format!("{scheme:?}"), n), &p, |b, p| {
                b.iter(|| single_step(black_box(p), &SolveParams::default()).unwrap())
            });
        }
    }
    g.finish();
}

fn profile(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_profile");
    for n in [50, 100, 200] {
        let v = Obstacle::FigF21.samples(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &v, |b, v| {
            b.iter(|| solve_profile(black_box(v), 5.0, ProfileParams::default()).unwrap())
        });
    }
    g.finish();
}

fn brute(c: &mut Criterion) {
    let p = tiny(4);
    c.bench_function("brute_force_4x4", |b| b.iter(|| brute_force_step(black_box(&p)).unwrap()));
}

criterion_group!(benches, grid_step, profile, brute);
criterion_main!(benches);
