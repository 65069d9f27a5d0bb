use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use altsp::acceptance::RiskSpec;
use altsp::fisher::mc_fisher_oracle_with;
use altsp::link::{KnotSet, LinkModel};
use altsp::optimizer::{random_feasible_search, FixedQuantities, Objective};
use altsp::par::Execution;

fn model() -> LinkModel {
    LinkModel::new(
        KnotSet::new(vec![0.0, 0.5, 1.0]).unwrap(),
        vec![-0.9, -1.5, -2.2],
        KnotSet::new(vec![0.0, 1.0]).unwrap(),
        vec![-0.7, -0.9],
    )
    .unwrap()
}

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn fisher_oracle(c: &mut Criterion) {
    let m = model();
    let mut g = c.benchmark_group("mc_fisher_oracle_200k");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mc_fisher_oracle_with(exec, black_box(0.4), &m, 1.0, 200_000, 1).unwrap())
        });
    }
    g.finish();
}

fn random_search(c: &mut Criterion) {
    let m = model();
    let risks = RiskSpec::preset("case1").unwrap();
    let mut g = c.benchmark_group("random_feasible_search_1000");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                random_feasible_search(Objective::Variance, &m, &risks, None, FixedQuantities::default(), 1000, 3, exec).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, fisher_oracle, random_search);
criterion_main!(benches);
