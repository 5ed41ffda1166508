//! End-to-end layer properties on the gradient fixtures.

use conelayer::array::Values;
use conelayer::canon::canonicalize_fresh;
use conelayer::fixtures::Fixture;
use conelayer::layer::{Execution, Layer};
use conelayer::solver::{solve, SolverSettings, Status};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tight() -> SolverSettings {
    SolverSettings::default().with_tolerance(1e-10)
}

fn bits(v: &Values) -> Vec<(String, Vec<u64>)> {
    v.iter()
        .map(|(k, a)| (k.clone(), a.data().iter().map(|x| x.to_bits()).collect()))
        .collect()
}

/// A fixed, non-uniform cotangent on every output.
fn cotangent(layer: &Layer) -> Values {
    layer
        .variables()
        .iter()
        .map(|d| {
            let data = (0..d.shape.size()).map(|k| 1.0 + k as f64 / 10.0).collect();
            (
                d.name.clone(),
                conelayer::array::Array::new(d.shape.clone(), data).unwrap(),
            )
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn cached_solve_matches_fresh_canonicalization(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for f in Fixture::gradient_suite() {
            let problem = f.problem();
            let layer = Layer::compile(&problem, tight()).unwrap();
            for _ in 0..100 / Fixture::gradient_suite().len() + 1 {
                let params = f.sample(&mut rng);
                let r = layer.forward(&params).unwrap();
                let fresh = canonicalize_fresh(&problem, &params).unwrap();
                let sol = solve(&fresh, &tight()).unwrap();
                prop_assert_eq!(r.status, sol.status);
                if sol.status != Status::Optimal {
                    continue;
                }
                let want = layer.asa().retrieve(&sol.x).unwrap();
                for (k, v) in r.outputs.unwrap() {
                    for (a, b) in v.data().iter().zip(want[&k].data()) {
                        prop_assert!((a - b).abs() <= 1e-7 * (1.0 + b.abs()), "{}: {} vs {}", f.name(), a, b);
                    }
                }
            }
        }
    }

    #[test]
    fn forward_and_backward_are_bitwise_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for f in Fixture::gradient_suite() {
            let layer = Layer::compile(&f.problem(), tight()).unwrap();
            let params = f.sample(&mut rng);
            let cot = cotangent(&layer);
            let a = layer.forward(&params).unwrap();
            let b = layer.forward(&params).unwrap();
            prop_assert_eq!(a.status, b.status);
            prop_assert_eq!(a.objective.map(f64::to_bits), b.objective.map(f64::to_bits));
            if a.status != Status::Optimal {
                continue;
            }
            prop_assert_eq!(bits(a.outputs.as_ref().unwrap()), bits(b.outputs.as_ref().unwrap()));
            let ga = layer.backward(&a.tape, &cot).unwrap();
            let gb = layer.backward(&b.tape, &cot).unwrap();
            prop_assert_eq!(bits(&ga.grads), bits(&gb.grads));
        }
    }

    #[test]
    fn batches_equal_sequential_calls(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for f in Fixture::gradient_suite() {
            let layer = Layer::compile(&f.problem(), tight()).unwrap();
            let batch: Vec<Values> = (0..8).map(|_| f.sample(&mut rng)).collect();
            let par = layer.forward_batch(&batch, Execution::Parallel);
            let seq: Vec<_> = batch.iter().map(|v| layer.forward(v)).collect();
            let cot = cotangent(&layer);
            let mut pairs = Vec::new();
            for (p, s) in par.iter().zip(&seq) {
                let (p, s) = (p.as_ref().unwrap(), s.as_ref().unwrap());
                prop_assert_eq!(p.status, s.status);
                if let (Some(a), Some(b)) = (&p.outputs, &s.outputs) {
                    prop_assert_eq!(bits(a), bits(b));
                    pairs.push((&p.tape, &cot));
                }
            }
            let grads = layer.backward_batch(&pairs, Execution::Parallel);
            for ((t, c), g) in pairs.iter().zip(grads) {
                let want = layer.backward(t, c).unwrap();
                prop_assert_eq!(bits(&g.unwrap().grads), bits(&want.grads));
            }
        }
    }
}
