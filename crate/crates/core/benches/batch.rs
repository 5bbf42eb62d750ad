use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use resilient_intersection::attacker::AttackStrategy;
use resilient_intersection::config::presets;
use resilient_intersection::des::{Observer, DEFAULT_BUDGET};
use resilient_intersection::sim::{run_batch, Supervision};
use resilient_intersection::verify::randomized_scenario;
use resilient_intersection::{BaselineTable, Exec, ResilientTable};

fn modes() -> [(&'static str, Exec); 2] {
    [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)]
}

fn batch(c: &mut Criterion) {
    let cfg = presets::two_vehicle_config().with_t_max(2);
    let baseline = BaselineTable::synthesize(&cfg);
    let table = ResilientTable::synthesize(&cfg, Exec::Parallel, DEFAULT_BUDGET).unwrap();
    let template = randomized_scenario(&cfg, 0, &AttackStrategy::RandomStealthy);
    let seeds: Vec<u64> = (0..2000).collect();

    let mut group = c.benchmark_group("run_batch");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_batch(&cfg, &template, &seeds, Supervision::Resilient(&table), &baseline, exec))
        });
    }
    group.finish();
}

fn observer(c: &mut Criterion) {
    let cfg = presets::two_vehicle_config().with_t_max(3);
    let mut group = c.benchmark_group("observer_build");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| Observer::build(&cfg, exec, DEFAULT_BUDGET).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, batch, observer);
criterion_main!(benches);
