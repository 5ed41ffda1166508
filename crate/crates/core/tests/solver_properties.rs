//! Solver behaviour on planted programs and on the oracle fixtures.

use conelayer::cone::ConeSpec;
use conelayer::fixtures::{planted_program, Fixture, PlantedProgram};
use conelayer::layer::Layer;
use conelayer::solver::{normalized_point, reconstruct, relative_residual, solve, SolverSettings, Status};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tight() -> SolverSettings {
    SolverSettings::default().with_tolerance(1e-10)
}

/// `n` variables; at most `n` of them pinned by zero rows and SOC blocks so
/// the planted point stays the unique solution.
fn planted() -> impl Strategy<Value = PlantedProgram> {
    (2usize..8, any::<u64>()).prop_flat_map(|(n, seed)| {
        (
            Just(n),
            Just(seed),
            0..=n.min(2),
            proptest::collection::vec(2usize..6, 0..=2),
            0usize..=2 * n,
        )
            .prop_filter("pinned", |(n, _, z, soc, _)| z + soc.len() <= *n)
            .prop_map(|(n, seed, zero, soc, extra)| {
                let cones = ConeSpec {
                    zero,
                    nonneg: n + extra,
                    soc,
                };
                planted_program(&mut ChaCha8Rng::seed_from_u64(seed), n, &cones, 0.5)
            })
    })
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recovers_the_planted_point(p in planted()) {
        let sol = solve(&p.data, &tight()).unwrap();
        prop_assert_eq!(sol.status, Status::Optimal);
        prop_assert!(close(&sol.x, &p.x, 1e-6), "{:?} vs {:?}", sol.x, p.x);
        prop_assert!(close(&sol.y, &p.y, 1e-6), "{:?} vs {:?}", sol.y, p.y);
        prop_assert!(relative_residual(&p.data, &sol.x, &sol.y, &sol.s) <= 1e-9);
    }

    #[test]
    fn scaling_the_cost_scales_only_the_dual(p in planted(), alpha in 0.1..10.0f64) {
        let base = solve(&p.data, &tight()).unwrap();
        let mut scaled = p.data.clone();
        scaled.c.iter_mut().for_each(|c| *c *= alpha);
        let sol = solve(&scaled, &tight()).unwrap();
        prop_assert_eq!(sol.status, Status::Optimal);
        prop_assert!(close(&sol.x, &base.x, 1e-6));
        let y: Vec<f64> = base.y.iter().map(|v| alpha * v).collect();
        prop_assert!(close(&sol.y, &y, 1e-6 * alpha.max(1.0)));
    }

    #[test]
    fn reconstruction_inverts_normalization(p in planted()) {
        let sol = solve(&p.data, &tight()).unwrap();
        let z = normalized_point(&sol).unwrap();
        let (x, y, s) = reconstruct(&z, &p.data.cones, p.data.num_vars());
        for (a, b) in x.iter().zip(&sol.x).chain(y.iter().zip(&sol.y)).chain(s.iter().zip(&sol.s)) {
            prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn oracle_fixtures_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for f in Fixture::oracle_suite() {
            let layer = Layer::compile(&f.problem(), tight()).unwrap();
            let params = f.sample(&mut rng);
            let want = f.oracle_solution(&params).unwrap().unwrap();
            let r = layer.forward(&params).unwrap();
            prop_assert_eq!(r.status, Status::Optimal);
            let got = r.outputs.unwrap()[f.output()].data().to_vec();
            let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-5, "{}: {:?} vs {:?}", f.name(), got, want);
        }
    }
}
