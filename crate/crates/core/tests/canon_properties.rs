//! The cached parameter-to-data map on random DPP problems: affinity, an exact
//! adjoint, agreement with fresh canonicalization, and tensor contraction
//! against direct evaluation.

use conelayer::array::Values;
use conelayer::canon::{canonicalize_fresh, compile_asa, expr_tensor, AsaForm, ConeProgramData, Layout, LeafIndex};
use conelayer::expr::{evaluate, Declaration, Expr, Problem};
use conelayer::fixtures::{gen_random_dpp, RandomSizes};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Random flat parameter vector honouring sign attributes.
fn theta<R: Rng>(asa: &AsaForm, decls: &[Declaration], rng: &mut R) -> Vec<f64> {
    let mut t: Vec<f64> = (0..asa.num_params()).map(|_| rng.random_range(-2.0..2.0)).collect();
    for d in decls {
        let e = asa.param_layout().get(&d.name).unwrap();
        for v in &mut t[e.offset..e.offset + d.shape.size()] {
            if d.attrs.nonneg {
                *v = v.abs();
            } else if d.attrs.nonpos {
                *v = -v.abs();
            }
        }
    }
    t
}

/// `(A values, b, c)` as one flat vector over the fixed pattern.
fn flat(d: &ConeProgramData) -> Vec<f64> {
    d.a.values().iter().chain(&d.b).chain(&d.c).copied().collect()
}

fn max_scaled_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

fn problem(seed: u64) -> (Problem, AsaForm) {
    let p = gen_random_dpp(seed, RandomSizes::default());
    let asa = compile_asa(&p).unwrap();
    (p, asa)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn materialize_is_affine(seed in any::<u64>(), t in 0.0..1.0f64) {
        let (p, asa) = problem(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t1 = theta(&asa, p.parameters(), &mut rng);
        let t2 = theta(&asa, p.parameters(), &mut rng);
        let mix: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let (d1, d2) = (flat(&asa.materialize(&t1).unwrap()), flat(&asa.materialize(&t2).unwrap()));
        let dm = flat(&asa.materialize(&mix).unwrap());
        let chord: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        prop_assert!(max_scaled_diff(&dm, &chord) <= 1e-12);
    }

    #[test]
    fn adjoint_is_exact(seed in any::<u64>()) {
        let (p, asa) = problem(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = theta(&asa, p.parameters(), &mut rng);
        let d0 = asa.materialize(&vec![0.0; asa.num_params()]).unwrap();
        let d = asa.materialize(&t).unwrap();
        let mut w = || -> f64 { rng.random_range(-1.0..1.0) };
        let wa: Vec<f64> = (0..d.a.nnz()).map(|_| w()).collect();
        let wb: Vec<f64> = (0..d.b.len()).map(|_| w()).collect();
        let wc: Vec<f64> = (0..d.c.len()).map(|_| w()).collect();
        let adj = asa.materialize_adjoint(&d.a.with_values(wa.clone()), &wb, &wc).unwrap();
        let diff: Vec<f64> = flat(&d).iter().zip(flat(&d0)).map(|(a, b)| a - b).collect();
        let all_w: Vec<f64> = wa.iter().chain(&wb).chain(&wc).copied().collect();
        let lhs = dot(&all_w, &diff);
        let rhs = dot(&t, &adj);
        let scale = all_w.iter().zip(&diff).map(|(a, b)| (a * b).abs()).sum::<f64>().max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn cached_matches_fresh(seed in any::<u64>()) {
        let (p, asa) = problem(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10 {
            let t = theta(&asa, p.parameters(), &mut rng);
            let cached = asa.materialize(&t).unwrap();
            let fresh = canonicalize_fresh(&p, &asa.unflatten_params(&t).unwrap()).unwrap();
            prop_assert_eq!(&cached.cones, &fresh.cones);
            // The cached pattern is structural; fresh data may omit entries that vanish.
            let (ca, fa) = (cached.a.to_dense(), fresh.a.to_dense());
            prop_assert_eq!(ca.shape(), fa.shape());
            prop_assert!(max_scaled_diff(ca.as_slice(), fa.as_slice()) <= 1e-14);
            prop_assert!(max_scaled_diff(&cached.b, &fresh.b) <= 1e-14);
            prop_assert!(max_scaled_diff(&cached.c, &fresh.c) <= 1e-14);
        }
    }

    #[test]
    fn tensor_contraction_matches_evaluation(seed in any::<u64>()) {
        let sizes = RandomSizes { max_variables: 2, max_parameters: 2, max_dim: 2, ..RandomSizes::default() };
        let p = gen_random_dpp(seed, sizes);
        let vars = Layout::new(p.variables());
        let params = Layout::new(p.parameters());
        prop_assume!(vars.size() + params.size() <= 10);
        let idx = LeafIndex::new(&vars, &params);
        let affine: Vec<&Expr> = p
            .constraints()
            .iter()
            .flat_map(|c| [c.lhs(), c.rhs()])
            .chain([p.objective()])
            .filter(|e| e.curvature().is_affine())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for e in affine {
            let t = expr_tensor(e, &idx).unwrap();
            let (rows, _, _) = t.dims();
            for _ in 0..5 {
                let th: Vec<f64> = (0..params.size()).map(|_| rng.random_range(-2.0..2.0)).collect();
                let x: Vec<f64> = (0..vars.size()).map(|_| rng.random_range(-2.0..2.0)).collect();
                let mut th1 = th.clone();
                th1.push(1.0);
                let mat = t.contract(&th1);
                let mut got = vec![0.0; rows];
                for (j, xj) in x.iter().chain([&1.0]).enumerate() {
                    for (i, g) in got.iter_mut().enumerate() {
                        *g += mat[i + j * rows] * xj;
                    }
                }
                let vv: Values = vars.unflatten(&x).unwrap();
                let pv: Values = params.unflatten(&th).unwrap();
                let want = evaluate(e, &vv, &pv).unwrap();
                prop_assert!(max_scaled_diff(&got, want.data()) <= 1e-12, "{:?} vs {:?}", got, want.data());
            }
        }
    }
}
