use super::*;
use crate::array::{Array, Values};
use crate::expr::{evaluate, Constraint, Declaration, Expr, LeafAttrs, Problem, Sense};
use crate::shape::Shape;

fn eq4(n: usize, m: usize) -> Problem {
    let x = Expr::variable("x", Shape::vector(n));
    let f = Expr::parameter("F", Shape::matrix(m, n));
    let g = Expr::parameter("g", Shape::vector(m));
    let lambda = Expr::parameter_with("lambda", Shape::scalar(), LeafAttrs::NONNEG);
    let obj = f
        .matmul(&x)
        .unwrap()
        .sub(&g)
        .unwrap()
        .norm2()
        .add(&lambda.mul(&x.norm2()).unwrap())
        .unwrap();
    let cons = vec![Constraint::ge(&x, &Expr::scalar(0.0)).unwrap()];
    Problem::new(Sense::Minimize, obj, cons).unwrap()
}

fn lcg(seed: &mut u64) -> f64 {
    *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
}

#[test]
fn leaf_tensors() {
    let vars = Layout::new(&[Declaration {
        name: "x".into(),
        shape: Shape::vector(3),
        attrs: LeafAttrs::NONE,
    }]);
    let params = Layout::new(&[
        Declaration {
            name: "a".into(),
            shape: Shape::scalar(),
            attrs: LeafAttrs::NONE,
        },
        Declaration {
            name: "g".into(),
            shape: Shape::vector(2),
            attrs: LeafAttrs::NONE,
        },
    ]);
    let idx = LeafIndex::new(&vars, &params);
    let five = leaf_tensor(&crate::expr::Leaf::Constant(Array::scalar(5.0)), &idx).unwrap();
    assert_eq!(five.entries(), &[(0, 3, 3, 5.0)]);
    let g = Expr::parameter("g", Shape::vector(2));
    let t = expr_tensor(&g, &idx).unwrap();
    assert_eq!(t.entries(), &[(0, 3, 1, 1.0), (1, 3, 2, 1.0)]);
    let x = Expr::variable("x", Shape::vector(3));
    let t = expr_tensor(&x, &idx).unwrap();
    assert_eq!(t.entries(), &[(0, 0, 3, 1.0), (1, 1, 3, 1.0), (2, 2, 3, 1.0)]);
    let y = Expr::variable("y", Shape::vector(3));
    assert_eq!(expr_tensor(&y, &idx), Err(CanonError::UndeclaredLeaf("y".into())));
}

#[test]
fn parametrized_matmul_places_parameters() {
    // F x with F 2x2: A entry (i, j) of -F x must be -F_ij from slice offset(F) + i + 2j.
    let x = Expr::variable("x", Shape::vector(2));
    let f = Expr::parameter("F", Shape::matrix(2, 2));
    let c = Constraint::eq(&f.matmul(&x).unwrap(), &Expr::scalar(0.0)).unwrap();
    let pb = Problem::new(Sense::Minimize, x.sum(), vec![c]).unwrap();
    let asa = compile_asa(&pb).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert_eq!(asa.ab_map().get(i, j, i + 2 * j), -1.0);
        }
    }
    assert_eq!(asa.ab_map().nnz(), 4);
}

#[test]
fn worked_example_structure() {
    let (n, m) = (2, 3);
    let asa = compile_asa(&eq4(n, m)).unwrap();
    assert_eq!(asa.num_params(), m * n + m + 1);
    assert_eq!(asa.cones().zero, 0);
    assert_eq!(asa.cones().nonneg, n);
    assert_eq!(asa.cones().soc, vec![m + 1, n + 1]);
    // Columns: x (n), t1, t2.
    let mut seed = 7;
    let theta: Vec<f64> = (0..asa.num_params()).map(|_| lcg(&mut seed)).collect();
    let data = asa.materialize(&theta).unwrap();
    let a = data.a.to_dense();
    let fv = |i: usize, j: usize| theta[i + j * m];
    let gv = |i: usize| theta[m * n + i];
    let lambda = theta[m * n + m];
    let mut c_want = vec![0.0; n + 2];
    c_want[n] = 1.0;
    c_want[n + 1] = lambda;
    assert_eq!(data.c, c_want);
    // Nonneg rows: -I on x.
    for i in 0..n {
        for j in 0..n + 2 {
            assert_eq!(a[(i, j)], if i == j { -1.0 } else { 0.0 });
        }
        assert_eq!(data.b[i], 0.0);
    }
    // First SOC: (t1, F x - g).
    let r0 = n;
    assert_eq!(a[(r0, n)], -1.0);
    for i in 0..m {
        for j in 0..n {
            assert_eq!(a[(r0 + 1 + i, j)], -fv(i, j));
        }
        assert_eq!(data.b[r0 + 1 + i], -gv(i));
    }
    // Second SOC: (t2, x).
    let r1 = n + m + 1;
    assert_eq!(a[(r1, n + 1)], -1.0);
    for i in 0..n {
        assert_eq!(a[(r1 + 1 + i, i)], -1.0);
    }
}

#[test]
fn zero_parameters_leave_constant_entries() {
    let asa = compile_asa(&eq4(2, 3)).unwrap();
    let data = asa.materialize(&vec![0.0; asa.num_params()]).unwrap();
    assert!(data.b.iter().all(|v| *v == 0.0));
    assert_eq!(data.c, vec![0.0, 0.0, 1.0, 0.0]);
    let nonzero: Vec<_> = data.a.iter().filter(|e| e.2 != 0.0).map(|e| e.2).collect();
    assert!(nonzero.iter().all(|v| *v == -1.0));
    assert_eq!(nonzero.len(), 2 + 1 + 1 + 2);
}

#[test]
fn unparametrized_problem_uses_constant_slice() {
    let x = Expr::variable("x", Shape::vector(2));
    let a = Expr::constant(Array::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
    let c = Constraint::le(&a.matmul(&x).unwrap(), &Expr::scalar(1.0)).unwrap();
    let pb = Problem::new(Sense::Minimize, x.norm2(), vec![c]).unwrap();
    let asa = compile_asa(&pb).unwrap();
    assert_eq!(asa.num_params(), 0);
    assert!(asa.ab_map().entries().iter().all(|e| e.2 == 0));
}

#[test]
fn materialize_is_affine_and_adjoint_is_exact() {
    let asa = compile_asa(&eq4(3, 4)).unwrap();
    let p = asa.num_params();
    let mut seed = 11;
    let t1: Vec<f64> = (0..p).map(|_| lcg(&mut seed)).collect();
    let t2: Vec<f64> = (0..p).map(|_| lcg(&mut seed)).collect();
    let d1 = asa.materialize(&t1).unwrap();
    let d2 = asa.materialize(&t2).unwrap();
    let double: Vec<f64> = t1.iter().map(|v| 2.0 * v).collect();
    let d0 = asa.materialize(&vec![0.0; p]).unwrap();
    let dd = asa.materialize(&double).unwrap();
    for (k, v) in dd.a.values().iter().enumerate() {
        assert_eq!(*v - d0.a.values()[k], 2.0 * (d1.a.values()[k] - d0.a.values()[k]));
    }
    // Adjoint identity <C(θ) - C(0), w> = <θ, C*(w)>.
    let w_a: Vec<f64> = (0..d1.a.nnz()).map(|_| lcg(&mut seed)).collect();
    let w_b: Vec<f64> = (0..d1.b.len()).map(|_| lcg(&mut seed)).collect();
    let w_c: Vec<f64> = (0..d1.c.len()).map(|_| lcg(&mut seed)).collect();
    let w = d1.a.with_values(w_a.clone());
    let adj = asa.materialize_adjoint(&w, &w_b, &w_c).unwrap();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let lhs = dot(
        &w_a,
        &d2.a
            .values()
            .iter()
            .zip(d0.a.values())
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    ) + dot(&w_b, &d2.b.iter().zip(&d0.b).map(|(a, b)| a - b).collect::<Vec<_>>())
        + dot(&w_c, &d2.c.iter().zip(&d0.c).map(|(a, b)| a - b).collect::<Vec<_>>());
    let rhs = dot(&t2, &adj);
    assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    // Zero cotangent, and lambda's slot picked out by its cost coefficient.
    let zero = asa.materialize_adjoint(
        &w.with_values(vec![0.0; w.nnz()]),
        &vec![0.0; d1.b.len()],
        &vec![0.0; d1.c.len()],
    );
    assert!(zero.unwrap().iter().all(|v| *v == 0.0));
    let mut dc = vec![0.0; d1.c.len()];
    dc[4] = 1.0;
    let g = asa
        .materialize_adjoint(&w.with_values(vec![0.0; w.nnz()]), &vec![0.0; d1.b.len()], &dc)
        .unwrap();
    let lam = asa.param_layout().get("lambda").unwrap().offset;
    assert_eq!(g[lam], 1.0);
    assert_eq!(g.iter().filter(|v| **v != 0.0).count(), 1);
}

#[test]
fn tensor_contraction_matches_evaluation() {
    let x = Expr::variable("x", Shape::vector(2));
    let y = Expr::constant(Array::from_rows(&[vec![1.0, 0.0, 2.0], vec![-1.0, 3.0, 0.5]]).unwrap());
    let p = Expr::parameter("P", Shape::matrix(3, 2));
    let q = Expr::parameter("q", Shape::scalar());
    let e = Expr::vstack(&[
        p.matmul(&x)
            .unwrap()
            .add(&y.t().matmul(&x.scale(3.0)).unwrap())
            .unwrap(),
        q.mul(&x.index((0, 2), (0, 1)).unwrap().sum())
            .unwrap()
            .reshape(Shape::vector(1))
            .unwrap(),
        p.add(&q)
            .unwrap()
            .t()
            .matmul(&Expr::constant(Array::vector(vec![1.0, -2.0, 0.5])))
            .unwrap(),
    ])
    .unwrap();
    let decl = |n: &str, s: Shape| Declaration {
        name: n.into(),
        shape: s,
        attrs: LeafAttrs::NONE,
    };
    let vars = Layout::new(&[decl("x", Shape::vector(2))]);
    let params = Layout::new(&[decl("P", Shape::matrix(3, 2)), decl("q", Shape::scalar())]);
    let idx = LeafIndex::new(&vars, &params);
    let t = expr_tensor(&e, &idx).unwrap();
    let mut seed = 3;
    for _ in 0..10 {
        let theta: Vec<f64> = (0..7).map(|_| lcg(&mut seed)).collect();
        let xv: Vec<f64> = (0..2).map(|_| lcg(&mut seed)).collect();
        let mut tt = theta.clone();
        tt.push(1.0);
        let mat = t.contract(&tt);
        let rows = t.dims().0;
        let mut got = vec![0.0; rows];
        for (j, xj) in xv.iter().chain(std::iter::once(&1.0)).enumerate() {
            for i in 0..rows {
                got[i] += mat[i + j * rows] * xj;
            }
        }
        let mut vv = Values::new();
        vv.insert("x".into(), Array::vector(xv.clone()));
        let pv = params.unflatten(&theta).unwrap();
        let want = evaluate(&e, &vv, &pv).unwrap();
        for (a, b) in got.iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn cached_matches_fresh() {
    let pb = eq4(2, 3);
    let asa = compile_asa(&pb).unwrap();
    let mut seed = 5;
    for _ in 0..5 {
        let mut theta: Vec<f64> = (0..asa.num_params()).map(|_| lcg(&mut seed)).collect();
        let last = theta.len() - 1;
        theta[last] = theta[last].abs();
        let vals = asa.unflatten_params(&theta).unwrap();
        let cached = asa.materialize(&theta).unwrap();
        let fresh = canonicalize_fresh(&pb, &vals).unwrap();
        assert_eq!(cached.a.to_dense(), fresh.a.to_dense());
        assert_eq!(cached.b, fresh.b);
        assert_eq!(cached.c, fresh.c);
        assert_eq!(cached.cones, fresh.cones);
    }
}

#[test]
fn retrieval_slices_user_variables() {
    let asa = compile_asa(&eq4(2, 3)).unwrap();
    let out = asa.retrieve(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out["x"].data(), &[1.0, 2.0]);
    let mut cot = Values::new();
    cot.insert("x".into(), Array::vector(vec![5.0, 6.0]));
    assert_eq!(asa.retrieve_adjoint(&cot).unwrap(), vec![5.0, 6.0, 0.0, 0.0]);
    assert!(asa.retrieve(&[1.0]).is_err());
}

#[test]
fn identity_retrieval_without_epigraphs() {
    let x = Expr::variable("x", Shape::vector(3));
    let c = Expr::constant(Array::vector(vec![1.0, 2.0, 3.0]));
    let pb = Problem::new(Sense::Minimize, c.matmul(&x).unwrap(), vec![]).unwrap();
    let asa = compile_asa(&pb).unwrap();
    assert_eq!(asa.retrieval().to_dense(), nalgebra::DMatrix::identity(3, 3));
    assert_eq!(asa.materialize(&[]).unwrap().c, vec![1.0, 2.0, 3.0]);
}
