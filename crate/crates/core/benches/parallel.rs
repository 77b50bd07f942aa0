//! Data-parallel kernels at the default rayon thread count against a
//! single-thread pool running the same code.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use goal_discovery::capacity::{capacity_map, Estimator, McOptions, PartitionConfig};
use goal_discovery::mdpcore::{GridEnv, MazeSpec, PointEnv, DEFAULT_STEP_MAX};
use goal_discovery::rl::{evaluate, QTable};
use goal_discovery::sampler::explore;
use goal_discovery::Discretizer;
use std::hint::black_box;

const DEMO: &str = include_str!("../fixtures/demo.maze");

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("parallel", rayon::ThreadPoolBuilder::new().build().unwrap()),
        ("sequential", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
    ]
}

fn bench(c: &mut Criterion) {
    let maze = MazeSpec::parse(DEMO).unwrap();
    let grid = GridEnv::new(maze.clone(), 0.0).unwrap();
    let point = PointEnv::new(maze, DEFAULT_STEP_MAX, 0.7, 0.7);
    let samples = explore(&point, 200, 200, 1, 0, 0).unwrap();
    let q = QTable::new(4);

    let mut g = c.benchmark_group("rollouts");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new("grid_400x200", name), |b| {
            b.iter(|| pool.install(|| black_box(explore(&grid, 400, 200, 7, 0, 0).unwrap())))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("clustered_capacity");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new("demo_point", name), |b| {
            b.iter(|| {
                pool.install(|| {
                    black_box(
                        capacity_map(
                            &samples,
                            Discretizer::new(0.7),
                            Estimator::Clustered,
                            McOptions::default(),
                            &PartitionConfig::default(),
                        )
                        .unwrap(),
                    )
                })
            })
        });
    }
    g.finish();

    let mut g = c.benchmark_group("evaluation");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new("greedy_200x600", name), |b| {
            b.iter(|| pool.install(|| black_box(evaluate(&grid, &q, 200, 600, 3).unwrap())))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
