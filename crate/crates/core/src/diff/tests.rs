use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::cone::{dproject_embedding, ConeSpec};
use crate::fixtures::{planted_program, PlantedProgram};
use crate::solver::{dot, solve, SolverSettings};

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn settings() -> SolverSettings {
    SolverSettings::default().with_tolerance(1e-11)
}

fn socp(seed: u64) -> PlantedProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cones = ConeSpec {
        zero: 2,
        nonneg: 10,
        soc: vec![3, 4],
    };
    planted_program(&mut rng, 6, &cones, 0.5)
}

fn lp_1d() -> ConeProgramData {
    ConeProgramData {
        a: CscMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]),
        b: vec![-2.0],
        c: vec![1.0],
        cones: ConeSpec {
            zero: 0,
            nonneg: 1,
            soc: vec![],
        },
    }
}

#[test]
fn q_is_skew() {
    let p = socp(1);
    let q = SkewData::new(&p.data);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let u = rand_vec(&mut rng, q.dim());
        let uu = dot(&u, &u);
        assert!(dot(&u, &q.mul(&u)).abs() <= 1e-12 * uu);
        let a = q.mul_t(&u);
        let b = q.to_dense().transpose() * nalgebra::DVector::from_column_slice(&u);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn m_action_matches_definition_and_adjoint() {
    let p = socp(3);
    let sol = solve(&p.data, &settings()).unwrap();
    let z = normalized_point(&sol).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let full = MOperator::new(&p.data, &z, false);
    let q = SkewData::new(&p.data);
    let n = p.data.num_vars();
    for _ in 0..20 {
        let u = rand_vec(&mut rng, full.dim());
        let d = dproject_embedding(&z, &p.data.cones, n, &u).unwrap();
        let qd = q.mul(&d);
        let expect: Vec<f64> = qd.iter().zip(&d).zip(&u).map(|((q, d), u)| q - d + u).collect();
        for (a, b) in full.apply(&u).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        for op in [&full, &MOperator::new(&p.data, &z, true)] {
            let a = rand_vec(&mut rng, op.ncols());
            let b = rand_vec(&mut rng, op.nrows());
            let lhs = dot(&op.apply(&a), &b);
            let rhs = dot(&a, &op.apply_t(&b));
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }
}

#[test]
fn full_m_annihilates_z() {
    let p = socp(5);
    let sol = solve(&p.data, &settings()).unwrap();
    let z = normalized_point(&sol).unwrap();
    let mz = MOperator::new(&p.data, &z, false).apply(&z);
    let scale = z.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(mz.iter().all(|v| v.abs() < 1e-8 * scale), "{mz:?}");
}

#[test]
fn identity_system() {
    let rhs = [1.0, -2.0, 3.0];
    for mode in [DiffMode::Direct, DiffMode::Iterative] {
        let (x, info) = solve_m_system(&DMatrix::<f64>::identity(3, 3), &rhs, mode);
        assert!(!info.fallback);
        for (a, b) in x.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}

#[test]
fn direct_and_iterative_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut m = DMatrix::<f64>::identity(20, 20) * 4.0;
    for v in m.iter_mut() {
        *v += rng.random_range(-1.0..1.0);
    }
    let rhs = rand_vec(&mut rng, 20);
    let (a, ia) = solve_m_system(&m, &rhs, DiffMode::Direct);
    let (b, ib) = solve_m_system(&m, &rhs, DiffMode::Iterative);
    assert_eq!((ia.mode, ib.mode), (DiffMode::Direct, DiffMode::Iterative));
    assert!(!ia.fallback && !ib.fallback);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-8, "{x} vs {y}");
    }
}

#[test]
fn auto_mode_selects_by_size() {
    assert_eq!(DiffMode::Auto.resolve(512), DiffMode::Direct);
    assert_eq!(DiffMode::Auto.resolve(513), DiffMode::Iterative);
    assert_eq!(DiffMode::Iterative.resolve(3), DiffMode::Iterative);
}

#[test]
fn singular_system_falls_back() {
    // min x s.t. x ≥ 1 stated twice: the duplicate active rows make M′ singular.
    let data = ConeProgramData {
        a: CscMatrix::from_triplets(2, 1, &[(0, 0, -1.0), (1, 0, -1.0)]),
        b: vec![-1.0, -1.0],
        c: vec![1.0],
        cones: ConeSpec {
            zero: 0,
            nonneg: 2,
            soc: vec![],
        },
    };
    let sol = solve(&data, &settings()).unwrap();
    assert!((sol.x[0] - 1.0).abs() < 1e-8);
    for mode in [DiffMode::Direct, DiffMode::Iterative] {
        let d = Derivative::new(&data, &sol, mode).unwrap();
        let t = d
            .forward(&data.a.with_values(vec![0.0; 2]), &[-1.0, -1.0], &[0.0])
            .unwrap();
        assert!(t.dx.iter().chain(&t.dy).chain(&t.ds).all(|v| v.is_finite()));
        assert!((t.dx[0] - 1.0).abs() < 1e-6, "{mode:?}: {:?}", t.dx);
        let g = d.adjoint(&[1.0]).unwrap();
        assert!(g.db.iter().chain(&g.dc).all(|v| v.is_finite()));
        if mode == DiffMode::Direct {
            assert!(t.info.fallback && g.info.fallback);
        }
    }
}

#[test]
fn one_dimensional_lp_derivatives() {
    // min x s.t. x ≥ 2, stored as b = −2: x⋆ = −b.
    let data = lp_1d();
    let sol = solve(&data, &settings()).unwrap();
    let zero_a = data.a.with_values(vec![0.0]);
    for mode in [DiffMode::Direct, DiffMode::Iterative] {
        let t = forward_derivative(&data, &sol, &zero_a, &[-1.0], &[0.0], mode).unwrap();
        assert!((t.dx[0] - 1.0).abs() < 1e-9, "{:?}", t.dx);
        let t = forward_derivative(&data, &sol, &zero_a, &[0.0], &[1.0], mode).unwrap();
        assert!(t.dx[0].abs() < 1e-9);
        let g = adjoint_derivative(&data, &sol, &[1.0], mode).unwrap();
        assert!((g.db[0] + 1.0).abs() < 1e-9 && g.dc[0].abs() < 1e-9, "{g:?}");
        assert!(!g.info.fallback);
        let g = adjoint_derivative(&data, &sol, &[0.0], mode).unwrap();
        assert!(g.db[0] == 0.0 && g.dc[0] == 0.0 && g.da.values()[0] == 0.0);
    }
}

#[test]
fn rejects_non_optimal_and_bad_lengths() {
    let mut data = lp_1d();
    data.c[0] = -1.0;
    data.b[0] = 0.0;
    let sol = solve(&data, &settings()).unwrap();
    assert!(matches!(
        Derivative::new(&data, &sol, DiffMode::Auto),
        Err(DiffError::NotOptimal(_))
    ));
    let data = lp_1d();
    let sol = solve(&data, &settings()).unwrap();
    let d = Derivative::new(&data, &sol, DiffMode::Auto).unwrap();
    assert!(matches!(d.adjoint(&[1.0, 2.0]), Err(DiffError::Dimension { .. })));
    assert!(matches!(d.adjoint(&[f64::NAN]), Err(DiffError::NonFinite(_))));
}

fn pairing(p: &PlantedProgram, seed: u64, mode: DiffMode) -> (f64, f64) {
    let sol = solve(&p.data, &settings()).unwrap();
    let d = Derivative::new(&p.data, &sol, mode).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let da = p.data.a.with_values(rand_vec(&mut rng, p.data.a.nnz()));
    let db = rand_vec(&mut rng, p.data.num_rows());
    let dc = rand_vec(&mut rng, p.data.num_vars());
    let dx_bar = rand_vec(&mut rng, p.data.num_vars());
    let t = d.forward(&da, &db, &dc).unwrap();
    let g = d.adjoint(&dx_bar).unwrap();
    let lhs = g.da.dot_pattern(&da) + dot(&g.db, &db) + dot(&g.dc, &dc);
    (lhs, dot(&dx_bar, &t.dx))
}

#[test]
fn forward_and_adjoint_are_consistent() {
    for seed in 0..10 {
        let p = socp(100 + seed);
        // LSQR stops at relative residual 1e-10, so its pairing error scales
        // with the conditioning of M′; the direct solve is exact.
        for (mode, tol) in [(DiffMode::Direct, 1e-7), (DiffMode::Iterative, 1e-5)] {
            let (lhs, rhs) = pairing(&p, seed, mode);
            assert!(
                (lhs - rhs).abs() <= tol * lhs.abs().max(rhs.abs()).max(1.0),
                "{seed} {mode:?}: {lhs} vs {rhs}"
            );
        }
    }
}

#[test]
fn forward_matches_finite_differences() {
    let h = 1e-6;
    for seed in 0..5 {
        let p = socp(200 + seed);
        let sol = solve(&p.data, &settings()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let da = p.data.a.with_values(rand_vec(&mut rng, p.data.a.nnz()));
        let db = rand_vec(&mut rng, p.data.num_rows());
        let dc = rand_vec(&mut rng, p.data.num_vars());
        let t = forward_derivative(&p.data, &sol, &da, &db, &dc, DiffMode::Direct).unwrap();
        let shifted = |sign: f64| {
            let mut d = p.data.clone();
            d.a.values_mut()
                .iter_mut()
                .zip(da.values())
                .for_each(|(a, v)| *a += sign * h * v);
            d.b.iter_mut().zip(&db).for_each(|(b, v)| *b += sign * h * v);
            d.c.iter_mut().zip(&dc).for_each(|(c, v)| *c += sign * h * v);
            solve(&d, &settings()).unwrap().x
        };
        let (xp, xm) = (shifted(1.0), shifted(-1.0));
        for j in 0..p.data.num_vars() {
            let fd = (xp[j] - xm[j]) / (2.0 * h);
            let err = (fd - t.dx[j]).abs() / fd.abs().max(t.dx[j].abs()).max(1e-3);
            assert!(err < 1e-4, "seed {seed} coord {j}: fd {fd} vs {}", t.dx[j]);
        }
    }
}

#[test]
fn adjoint_pattern_matches_a() {
    let p = socp(7);
    let sol = solve(&p.data, &settings()).unwrap();
    let g = adjoint_derivative(&p.data, &sol, &vec![1.0; 6], DiffMode::Auto).unwrap();
    assert_eq!(g.da.col_ptr(), p.data.a.col_ptr());
    assert_eq!(g.da.row_idx(), p.data.a.row_idx());
}
