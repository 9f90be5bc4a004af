use beamsel_bench::{agent_and_batch, fixture};
use beamsel_core::baselines::{oracle_best_action, restrict_action_space, StrategyDescriptor};
use beamsel_core::netsim::run_round;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn round(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_round");
    for n_ue in [5, 20] {
        let f = fixture(n_ue);
        let subset = f.cfg.cold_start().unwrap().subset;
        group.bench_with_input(BenchmarkId::from_parameter(n_ue), &f, |b, f| {
            b.iter(|| run_round(black_box(&f.scenario), &subset, 35.0, &f.cfg.sim, 0).unwrap())
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle_sweep");
    for n_ue in [5, 20] {
        let f = fixture(n_ue);
        let space = restrict_action_space(&StrategyDescriptor::oracle(), &f.ctx.space).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n_ue), &f, |b, f| {
            b.iter(|| oracle_best_action(black_box(&f.links), &space, &f.ctx.evaluator).unwrap())
        });
    }
    group.finish();
}

fn a2c_update(c: &mut Criterion) {
    let (mut agent, batch) = agent_and_batch(5, 150);
    c.bench_function("a2c_update", |b| b.iter(|| agent.update(black_box(&batch)).unwrap()));
    let (agent, batch) = agent_and_batch(5, 150);
    c.bench_function("a2c_act_greedy", |b| b.iter(|| agent.greedy(black_box(&batch[0].features)).unwrap()));
}

criterion_group!(benches, round, oracle, a2c_update);
criterion_main!(benches);
