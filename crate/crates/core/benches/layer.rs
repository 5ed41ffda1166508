//! Batched layer calls with the rayon pool against a plain loop, and cached
//! against fresh canonicalization.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use conelayer::array::Values;
use conelayer::canon::canonicalize_fresh;
use conelayer::fixtures::Fixture;
use conelayer::layer::{Execution, Layer};
use conelayer::solver::SolverSettings;

fn batch(f: &Fixture, size: usize) -> Vec<Values> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    (0..size).map(|_| f.sample(&mut rng)).collect()
}

fn cotangent(layer: &Layer) -> Values {
    layer
        .variables()
        .iter()
        .map(|d| {
            let ones = vec![1.0; d.shape.size()];
            (
                d.name.clone(),
                conelayer::array::Array::new(d.shape.clone(), ones).expect("sized"),
            )
        })
        .collect()
}

fn batches(c: &mut Criterion) {
    let fixtures = [
        Fixture::OptnetQp { n: 10, m: 3, p: 10 },
        Fixture::ControlPolicy { n: 2, m: 3 },
    ];
    for f in fixtures {
        let layer = Layer::compile(&f.problem(), SolverSettings::default()).expect("DPP fixture");
        let inputs = batch(&f, 64);
        let mut group = c.benchmark_group(format!("forward_batch/{}", f.name()));
        for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_function(BenchmarkId::from_parameter(label), |b| {
                b.iter(|| layer.forward_batch(black_box(&inputs), exec))
            });
        }
        group.finish();

        let results: Vec<_> = layer
            .forward_batch(&inputs, Execution::Parallel)
            .into_iter()
            .map(|r| r.expect("valid parameters"))
            .collect();
        let cot = cotangent(&layer);
        let pairs: Vec<_> = results.iter().map(|r| (&r.tape, &cot)).collect();
        let mut group = c.benchmark_group(format!("backward_batch/{}", f.name()));
        for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            // The first call caches each tape's factorization; later ones reuse it.
            group.bench_function(BenchmarkId::from_parameter(label), |b| {
                b.iter(|| layer.backward_batch(black_box(&pairs), exec))
            });
        }
        group.finish();
    }
}

fn canonicalization(c: &mut Criterion) {
    for f in [
        Fixture::ControlPolicy { n: 2, m: 3 },
        Fixture::OptnetQp { n: 10, m: 3, p: 10 },
    ] {
        let problem = f.problem();
        let layer = Layer::compile(&problem, SolverSettings::default()).expect("DPP fixture");
        let values = batch(&f, 1).pop().expect("one sample");
        let theta = layer.bind(&values).expect("valid parameters");
        let mut group = c.benchmark_group(format!("canonicalize/{}", f.name()));
        group.bench_function("fresh", |b| {
            b.iter(|| canonicalize_fresh(black_box(&problem), black_box(&values)))
        });
        group.bench_function("cached", |b| b.iter(|| layer.asa().materialize(black_box(&theta))));
        group.finish();
    }
}

criterion_group!(benches, batches, canonicalization);
criterion_main!(benches);
