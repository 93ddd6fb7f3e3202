//! Replicate loop under parallel and sequential execution.

use adaptci::harness::{prepare, truth_vectors, ExperimentConfig};
use adaptci::par::{map_range, Execution};
use adaptci::seqmodel::{derive_replicate_seed, sample};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn nested_config() -> ExperimentConfig {
    ExperimentConfig::from_json(
        r#"{
          "schema_version": 1,
          "model": { "d": 201, "n": 400 },
          "functional": { "kind": "point_evaluation" },
          "collection": {
            "kind": "nested",
            "classes": [
              { "kind": "monotone_lipschitz", "beta": 1.0, "m": 1.0 },
              { "kind": "monotone_lipschitz", "beta": 1.0, "m": 8.0 }
            ]
          },
          "alpha": 0.1,
          "construction": "adaptive_nested",
          "truth_points": [ { "class": 0, "point": { "kind": "zero" } } ],
          "replicates": 4000,
          "seed": 1
        }"#,
    )
    .expect("bench config")
}

fn replicates(c: &mut Criterion) {
    let cfg = nested_config();
    let prepared = prepare(&cfg, Execution::Sequential).expect("prepare");
    let truth = truth_vectors(&cfg).expect("truths").remove(0);
    let model = cfg.sequence_model().expect("model");
    let mut group = c.benchmark_group("replicates");
    group.sample_size(10);
    for exec in [Execution::Parallel, Execution::Sequential] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| {
                let lengths = map_range(cfg.replicates, exec, |r| {
                    let y = sample(&model, &truth, derive_replicate_seed(cfg.seed, r as u64)).expect("sample");
                    prepared.interval(&y.y, cfg.alpha).expect("interval").length()
                });
                black_box(lengths.iter().sum::<f64>())
            })
        });
    }
    group.finish();
}

criterion_group!(benches, replicates);
criterion_main!(benches);
