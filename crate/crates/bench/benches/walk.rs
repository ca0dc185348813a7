use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;
use vrjp_bench::{ballistic_tree, halfline_env, rng};
use vrjp_core::rwre::{estimate_speed, run_walk};
use vrjp_core::vrjp::{skeleton_y, FixedTree};
use vrjp_core::{MomentEngine, WalkConfig};

fn walk(c: &mut Criterion) {
    let mut g = c.benchmark_group("walk");
    g.sample_size(20);
    g.bench_function("1e5 steps, fresh tree", |b| {
        b.iter_batched(
            || ballistic_tree(3).unwrap(),
            |mut tree| {
                let cfg = WalkConfig { max_steps: 100_000, buffer: 20_000, seed: 5 };
                run_walk(&mut tree, &cfg).unwrap()
            },
            BatchSize::LargeInput,
        )
    });
    let mut tree = ballistic_tree(3).unwrap();
    let tr = run_walk(&mut tree, &WalkConfig { max_steps: 100_000, buffer: 20_000, seed: 5 }).unwrap();
    g.bench_function("speed estimators 1e5", |b| b.iter(|| estimate_speed(black_box(&tr)).unwrap()));
    g.finish();

    let engine = MomentEngine::for_c(1.0).unwrap();
    let env = halfline_env(&engine, 50, 9).unwrap();
    c.bench_function("halfline exit time n=50", |b| b.iter(|| env.expected_exit_time(black_box(0), -1, 50).unwrap()));

    let star = FixedTree::star(3).unwrap();
    let mut r = rng(11);
    let mut local = Vec::new();
    c.bench_function("vrjp skeleton star-3 K=4", |b| b.iter(|| skeleton_y(&star, 1.0, 4, &mut local, &mut r)));
}

criterion_group!(benches, walk);
criterion_main!(benches);
