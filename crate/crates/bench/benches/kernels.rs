use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use dfa_meet::chain::sample_ergodic_walk;
use dfa_meet::mc::{default_cap, sample_coalescence, sample_meeting_independent};
use dfa_meet::seed::rng_from_u64;
use dfa_meet::{build_aux_chain, walk_matrix, Dfa, StationaryMethod, TransitionOperator};

const N: usize = 1000;

fn generation(c: &mut Criterion) {
    let mut rng = rng_from_u64(1);
    c.bench_function("generate n=1000 r=2", |b| b.iter(|| Dfa::generate(N, 2, &mut rng).unwrap()));
}

fn stationary(c: &mut Criterion) {
    let mut rng = rng_from_u64(2);
    let draw = sample_ergodic_walk(N, 2, StationaryMethod::Auto, &mut rng).unwrap();
    c.bench_function("stationary n=1000 r=2", |b| {
        b.iter(|| walk_matrix(&draw.dfa).with_stationary(StationaryMethod::Auto).unwrap())
    });
}

fn aux_step(c: &mut Criterion) {
    let mut rng = rng_from_u64(3);
    let draw = sample_ergodic_walk(N, 2, StationaryMethod::Auto, &mut rng).unwrap();
    let pi = draw.chain.stationary().unwrap().to_vec();
    let aux = build_aux_chain(&draw.chain, &pi).unwrap();
    let m = aux.num_states();
    let dist = vec![1.0 / m as f64; m];
    let mut out = vec![0.0; m];
    let mut group = c.benchmark_group("aux n=1000 r=2");
    group.sample_size(20);
    group.bench_function("push_forward", |b| b.iter(|| aux.push_forward(&dist, &mut out)));
    group.bench_function("pull_back", |b| b.iter(|| aux.pull_back(&dist, &mut out)));
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let mut rng = rng_from_u64(4);
    let cap = default_cap(N);
    let mut group = c.benchmark_group("simulate n=1000 r=2");
    group.bench_function("independent meeting", |b| {
        b.iter_batched(
            || Dfa::generate(N, 2, &mut rng).unwrap(),
            |d| sample_meeting_independent(&d, 0, 1, cap, &mut rng_from_u64(5)),
            BatchSize::SmallInput,
        )
    });
    group.sample_size(10);
    group.bench_function("coalescence", |b| {
        b.iter_batched(
            || Dfa::generate(N, 2, &mut rng).unwrap(),
            |d| sample_coalescence(&d, cap, &mut rng_from_u64(6)),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(benches, generation, stationary, aux_step, simulation);
criterion_main!(benches);
