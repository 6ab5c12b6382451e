use criterion::{criterion_group, criterion_main, Criterion};
use dgnash::game::Player;
use dgnash::nash::{verify_map, VerifyOptions};
use dgnash::value::{solve_lower_value, SolverOptions};
use dgnash_bench::{built_map, example, exact_lowers, grid};

fn solver(c: &mut Criterion) {
    let spec = example();
    let g = grid(&spec, 50, 101);
    let opts = SolverOptions::default();
    c.bench_function("lower value 50x101x101", |b| b.iter(|| solve_lower_value(&spec, &g, Player::First, &opts).unwrap()));
}

fn builder(c: &mut Criterion) {
    let spec = example();
    let g = grid(&spec, 20, 41);
    let lowers = exact_lowers(&g);
    let mut group = c.benchmark_group("nash map");
    group.sample_size(10);
    group.bench_function("build 20x41x41", |b| b.iter(|| built_map(&spec, &g, &lowers)));
    group.finish();
}

fn verifier(c: &mut Criterion) {
    let spec = example();
    let g = grid(&spec, 20, 41);
    let lowers = exact_lowers(&g);
    let map = built_map(&spec, &g, &lowers);
    let opts = VerifyOptions::default().with_step(g.auto_stride(&spec));
    let mut group = c.benchmark_group("verifier");
    group.sample_size(10);
    group.bench_function("verify 20x41x41", |b| b.iter(|| verify_map(&map, &spec, Some((&lowers.0, &lowers.1)), &opts).unwrap()));
    group.finish();
}

criterion_group!(benches, solver, builder, verifier);
criterion_main!(benches);
