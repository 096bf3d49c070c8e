use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use devissage::dudley::{dudley_fields, DudleyParams, DudleyState};
use devissage::rotsym::{escape_angle_law, EscapeConfig, StartDirection, Warp, WarpModel};
use devissage::sde::{run_ensemble, TimeGrid};
use devissage::Execution;

fn policies() -> Vec<(&'static str, Execution)> {
    let mut v = vec![("sequential", Execution::Sequential)];
    #[cfg(feature = "parallel")]
    v.push(("parallel", Execution::Parallel));
    v
}

fn dudley_ensemble(c: &mut Criterion) {
    let params = DudleyParams::new(3, 1.0).unwrap();
    let start = DudleyState::origin(3, 1.0, 0.0).unwrap().to_vec();
    let grid = TimeGrid::new(5.0, 1e-3, 100).unwrap();
    let mut group = c.benchmark_group("dudley_ensemble");
    group.sample_size(10);
    for paths in [16usize, 64] {
        for (name, exec) in policies() {
            group.bench_with_input(BenchmarkId::new(name, paths), &paths, |b, &n| {
                b.iter(|| run_ensemble(&dudley_fields(params), black_box(&start), n, &grid, 1, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn escape_angles(c: &mut Criterion) {
    let model = WarpModel::new(3, Warp::Sinh).unwrap();
    let config = EscapeConfig {
        r0: 1.0,
        start: StartDirection::Uniform,
        paths: 64,
        grid: TimeGrid::new(5.0, 1e-2, 10).unwrap(),
        seed: 2,
        tolerance: 1e-2,
    };
    let mut group = c.benchmark_group("escape_angles");
    group.sample_size(10);
    for (name, exec) in policies() {
        group.bench_function(name, |b| b.iter(|| escape_angle_law(&model, black_box(&config), exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, dudley_ensemble, escape_angles);
criterion_main!(benches);
