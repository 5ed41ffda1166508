//! Named problems with parameter samplers and reference solutions.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::array::{Array, Values};
use crate::canon::ConeProgramData;
use crate::expr::{Constraint, Expr, LeafAttrs, Problem, Sense};
use crate::shape::Shape;
use crate::solver::ConeSolution;

use super::oracles::{self, OracleError};

/// Where a fixture's reference answer comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Closed form (e.g. `max(0, x)`).
    Analytic,
    SimplexProjection,
    BoundedSimplexProjection,
    EqualityQpKkt,
    VertexEnumeration,
    /// No closed form; checked against central differences of the solver.
    FiniteDifferences,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fixture {
    /// `min ‖x − y‖² s.t. y ≥ 0`.
    Relu { n: usize },
    /// `min ‖x − y‖² s.t. 1ᵀy = 1, 0 ≤ y ≤ 1`.
    Sparsemax { n: usize },
    /// `min ‖x − y‖² s.t. 1ᵀy = 1, 0 ≤ y ≤ u`, with `u` a parameter.
    ConstrainedSparsemax { n: usize },
    /// `min ½‖Q_sqrt x‖² + qᵀx s.t. Ax = b, Gx ≤ h`.
    OptnetQp { n: usize, m: usize, p: usize },
    /// `min ‖Fx − g‖₂ + λ‖x‖₂ s.t. x ≥ 0`.
    NormRegression { n: usize, m: usize },
    /// Control-Lyapunov policy `min ½‖P_sqrt u‖² + xᵀy + qᵀu s.t. ‖u‖ ≤ ½, y = P_21 u`.
    ControlPolicy { n: usize, m: usize },
    /// `min cᵀx s.t. Gx ≤ h` over a bounded polytope.
    Lp { n: usize, p: usize },
    /// `min ½‖Q_sqrt x‖² + qᵀx s.t. Ax = b`.
    EqualityQp { n: usize, m: usize },
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn gauss_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Array {
    Array::vector((0..n).map(|_| scale * gauss(rng)).collect())
}

fn gauss_mat<R: Rng + ?Sized>(rng: &mut R, r: usize, c: usize, scale: f64) -> Array {
    Array::new(Shape::matrix(r, c), (0..r * c).map(|_| scale * gauss(rng)).collect()).expect("sized")
}

/// `I + scale·N(0, 1)`.
fn near_identity<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Array {
    let mut a = gauss_mat(rng, n, n, scale);
    for i in 0..n {
        a.data_mut()[i * n + i] += 1.0;
    }
    a
}

/// Column-major product of an `r × k` and a `k`-vector.
fn mat_vec(a: &Array, x: &[f64]) -> Vec<f64> {
    let (r, k) = (a.shape().rows(), a.shape().cols());
    let mut out = vec![0.0; r];
    for j in 0..k {
        for i in 0..r {
            out[i] += a.data()[j * r + i] * x[j];
        }
    }
    out
}

fn values(pairs: Vec<(&str, Array)>) -> Values {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn sum_squares_of_difference(x: &Expr, y: &Expr) -> Expr {
    x.sub(y).expect("same shape").sum_squares()
}

/// Tiny shorthand for building fixture problems, which are shape-correct by
/// construction.
fn ok<T, E: std::fmt::Debug>(r: Result<T, E>) -> T {
    r.expect("fixture problems are well formed")
}

impl Fixture {
    /// The six fixtures used for end-to-end gradient checks, at small sizes.
    pub fn gradient_suite() -> Vec<Fixture> {
        vec![
            Fixture::Relu { n: 4 },
            Fixture::Sparsemax { n: 4 },
            Fixture::ConstrainedSparsemax { n: 4 },
            Fixture::OptnetQp { n: 3, m: 1, p: 3 },
            Fixture::NormRegression { n: 2, m: 3 },
            Fixture::ControlPolicy { n: 2, m: 3 },
        ]
    }

    /// Fixtures with an independent solution oracle.
    pub fn oracle_suite() -> Vec<Fixture> {
        vec![
            Fixture::Relu { n: 5 },
            Fixture::Sparsemax { n: 5 },
            Fixture::ConstrainedSparsemax { n: 5 },
            Fixture::Lp { n: 2, p: 6 },
            Fixture::Lp { n: 3, p: 9 },
            Fixture::EqualityQp { n: 4, m: 2 },
        ]
    }

    pub fn name(&self) -> String {
        match *self {
            Fixture::Relu { n } => format!("relu_{n}"),
            Fixture::Sparsemax { n } => format!("sparsemax_{n}"),
            Fixture::ConstrainedSparsemax { n } => format!("constrained_sparsemax_{n}"),
            Fixture::OptnetQp { n, m, p } => format!("optnet_qp_{n}_{m}_{p}"),
            Fixture::NormRegression { n, m } => format!("norm_regression_{n}_{m}"),
            Fixture::ControlPolicy { n, m } => format!("control_policy_{n}_{m}"),
            Fixture::Lp { n, p } => format!("lp_{n}_{p}"),
            Fixture::EqualityQp { n, m } => format!("equality_qp_{n}_{m}"),
        }
    }

    pub fn reference(&self) -> Reference {
        match self {
            Fixture::Relu { .. } => Reference::Analytic,
            Fixture::Sparsemax { .. } => Reference::SimplexProjection,
            Fixture::ConstrainedSparsemax { .. } => Reference::BoundedSimplexProjection,
            Fixture::Lp { .. } => Reference::VertexEnumeration,
            Fixture::EqualityQp { .. } => Reference::EqualityQpKkt,
            _ => Reference::FiniteDifferences,
        }
    }

    /// Name of the variable the layer exposes.
    pub fn output(&self) -> &'static str {
        match self {
            Fixture::Relu { .. } | Fixture::Sparsemax { .. } | Fixture::ConstrainedSparsemax { .. } => "y",
            Fixture::ControlPolicy { .. } => "u",
            _ => "x",
        }
    }

    pub fn problem(&self) -> Problem {
        match *self {
            Fixture::Relu { n } => {
                let x = Expr::parameter("x", Shape::vector(n));
                let y = Expr::variable("y", Shape::vector(n));
                let cons = vec![ok(Constraint::ge(&y, &Expr::scalar(0.0)))];
                ok(Problem::new(Sense::Minimize, sum_squares_of_difference(&x, &y), cons))
            }
            Fixture::Sparsemax { n } => {
                let x = Expr::parameter("x", Shape::vector(n));
                let y = Expr::variable("y", Shape::vector(n));
                let cons = vec![
                    ok(Constraint::eq(&y.sum(), &Expr::scalar(1.0))),
                    ok(Constraint::le(&Expr::scalar(0.0), &y)),
                    ok(Constraint::le(&y, &Expr::scalar(1.0))),
                ];
                ok(Problem::new(Sense::Minimize, sum_squares_of_difference(&x, &y), cons))
            }
            Fixture::ConstrainedSparsemax { n } => {
                let x = Expr::parameter("x", Shape::vector(n));
                let u = Expr::parameter_with("u", Shape::vector(n), LeafAttrs::NONNEG);
                let y = Expr::variable("y", Shape::vector(n));
                let cons = vec![
                    ok(Constraint::eq(&y.sum(), &Expr::scalar(1.0))),
                    ok(Constraint::le(&Expr::scalar(0.0), &y)),
                    ok(Constraint::le(&y, &u)),
                ];
                ok(Problem::new(Sense::Minimize, sum_squares_of_difference(&x, &y), cons))
            }
            Fixture::OptnetQp { n, m, p } => {
                let (x, obj) = qp_objective(n);
                let a = Expr::parameter("A", Shape::matrix(m, n));
                let b = Expr::parameter("b", Shape::vector(m));
                let g = Expr::parameter("G", Shape::matrix(p, n));
                let h = Expr::parameter("h", Shape::vector(p));
                let cons = vec![
                    ok(Constraint::eq(&ok(a.matmul(&x)), &b)),
                    ok(Constraint::le(&ok(g.matmul(&x)), &h)),
                ];
                ok(Problem::new(Sense::Minimize, obj, cons))
            }
            Fixture::EqualityQp { n, m } => {
                let (x, obj) = qp_objective(n);
                let a = Expr::parameter("A", Shape::matrix(m, n));
                let b = Expr::parameter("b", Shape::vector(m));
                let cons = vec![ok(Constraint::eq(&ok(a.matmul(&x)), &b))];
                ok(Problem::new(Sense::Minimize, obj, cons))
            }
            Fixture::NormRegression { n, m } => norm_regression(n, m),
            Fixture::ControlPolicy { n, m } => {
                let x = Expr::parameter("x", Shape::matrix(n, 1));
                let p_sqrt = Expr::parameter("P_sqrt", Shape::matrix(m, m));
                let p_21 = Expr::parameter("P_21", Shape::matrix(n, m));
                let q = Expr::parameter("q", Shape::matrix(m, 1));
                let u = Expr::variable("u", Shape::matrix(m, 1));
                let y = Expr::variable("y", Shape::matrix(n, 1));
                let obj = ok(ok(p_sqrt.matmul(&u))
                    .sum_squares()
                    .scale(0.5)
                    .add(&ok(x.t().matmul(&y)).sum()))
                .add(&ok(q.t().matmul(&u)).sum());
                let cons = vec![
                    ok(Constraint::le(&u.norm2(), &Expr::scalar(0.5))),
                    ok(Constraint::eq(&y, &ok(p_21.matmul(&u)))),
                ];
                ok(Problem::new(Sense::Minimize, ok(obj), cons))
            }
            Fixture::Lp { n, p } => {
                let c = Expr::parameter("c", Shape::vector(n));
                let g = Expr::parameter("G", Shape::matrix(p, n));
                let h = Expr::parameter("h", Shape::vector(p));
                let x = Expr::variable("x", Shape::vector(n));
                let cons = vec![ok(Constraint::le(&ok(g.matmul(&x)), &h))];
                ok(Problem::new(Sense::Minimize, ok(c.matmul(&x)), cons))
            }
        }
    }

    /// A random parameter assignment. Samples are well scaled but not checked
    /// for degeneracy; callers that need strict complementarity filter them.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Values {
        match *self {
            Fixture::Relu { n } => {
                let x = (0..n)
                    .map(|_| {
                        let v: f64 = rng.random_range(0.2..2.0);
                        if rng.random::<bool>() {
                            v
                        } else {
                            -v
                        }
                    })
                    .collect();
                values(vec![("x", Array::vector(x))])
            }
            Fixture::Sparsemax { n } => values(vec![("x", gauss_vec(rng, n, 1.0))]),
            Fixture::ConstrainedSparsemax { n } => {
                let u = (0..n).map(|_| rng.random_range(0.3..0.8)).collect();
                values(vec![("x", gauss_vec(rng, n, 1.0)), ("u", Array::vector(u))])
            }
            Fixture::OptnetQp { n, m, p } => {
                let x0: Vec<f64> = (0..n).map(|_| gauss(rng)).collect();
                let a = gauss_mat(rng, m, n, 1.0);
                let g = gauss_mat(rng, p, n, 1.0);
                let b = mat_vec(&a, &x0);
                let h = mat_vec(&g, &x0)
                    .into_iter()
                    .map(|v| v + rng.random_range(0.1..1.0))
                    .collect();
                values(vec![
                    ("Q_sqrt", near_identity(rng, n, 0.3)),
                    ("q", gauss_vec(rng, n, 2.0)),
                    ("A", a),
                    ("b", Array::vector(b)),
                    ("G", g),
                    ("h", Array::vector(h)),
                ])
            }
            Fixture::EqualityQp { n, m } => values(vec![
                ("Q_sqrt", near_identity(rng, n, 0.3)),
                ("q", gauss_vec(rng, n, 1.0)),
                ("A", gauss_mat(rng, m, n, 1.0)),
                ("b", gauss_vec(rng, m, 1.0)),
            ]),
            Fixture::NormRegression { n, m } => values(vec![
                ("F", gauss_mat(rng, m, n, 1.0)),
                ("g", gauss_vec(rng, m, 2.0)),
                ("lambda", Array::scalar(rng.random_range(0.05..0.3))),
            ]),
            Fixture::ControlPolicy { n, m } => values(vec![
                ("x", gauss_mat(rng, n, 1, 1.0)),
                ("P_sqrt", near_identity(rng, m, 0.3)),
                ("P_21", gauss_mat(rng, n, m, 1.0)),
                ("q", gauss_mat(rng, m, 1, 1.0)),
            ]),
            Fixture::Lp { n, p } => {
                // Box rows keep the polytope bounded; the rest are random cuts
                // that leave the origin strictly feasible.
                assert!(p >= 2 * n, "need at least the 2n box rows");
                let mut rows: Vec<Vec<f64>> = Vec::with_capacity(p);
                let mut h = Vec::with_capacity(p);
                for sign in [1.0, -1.0] {
                    for i in 0..n {
                        let mut r = vec![0.0; n];
                        r[i] = sign;
                        rows.push(r);
                        h.push(rng.random_range(1.0..2.0));
                    }
                }
                for _ in 2 * n..p {
                    rows.push((0..n).map(|_| gauss(rng)).collect());
                    h.push(rng.random_range(0.5..1.5));
                }
                values(vec![
                    ("c", gauss_vec(rng, n, 1.0)),
                    ("G", Array::from_rows(&rows).expect("rectangular")),
                    ("h", Array::vector(h)),
                ])
            }
        }
    }

    /// Solution from the fixture's independent oracle, when it has one.
    pub fn oracle_solution(&self, params: &Values) -> Option<Result<Vec<f64>, OracleError>> {
        let v = |k: &str| params[k].data().to_vec();
        match self {
            Fixture::Relu { .. } => Some(Ok(v("x").into_iter().map(|x| x.max(0.0)).collect())),
            Fixture::Sparsemax { .. } => Some(oracles::simplex_projection(&v("x"), None)),
            Fixture::ConstrainedSparsemax { .. } => Some(oracles::simplex_projection(&v("x"), Some(&v("u")))),
            Fixture::Lp { .. } => Some(oracles::lp_vertex_enumeration(&v("c"), &params["G"].to_rows(), &v("h"))),
            Fixture::EqualityQp { n, .. } => {
                let qs = to_matrix(&params["Q_sqrt"]);
                let q = qs.transpose() * &qs;
                let a = to_matrix(&params["A"]);
                Some(oracles::eq_qp(&q, &v("q"), &a, &v("b")).map(|(x, _)| {
                    debug_assert_eq!(x.len(), *n);
                    x
                }))
            }
            _ => None,
        }
    }
}

fn to_matrix(a: &Array) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_column_slice(a.shape().rows(), a.shape().cols(), a.data())
}

fn qp_objective(n: usize) -> (Expr, Expr) {
    let q_sqrt = Expr::parameter("Q_sqrt", Shape::matrix(n, n));
    let q = Expr::parameter("q", Shape::vector(n));
    let x = Expr::variable("x", Shape::vector(n));
    let obj = ok(ok(q_sqrt.matmul(&x)).sum_squares().scale(0.5).add(&ok(q.matmul(&x))));
    (x, obj)
}

/// `min ‖Fx − g‖₂ + λ‖x‖₂ s.t. x ≥ 0` with `F ∈ R^{m×n}`, `λ ≥ 0`.
pub fn norm_regression(n: usize, m: usize) -> Problem {
    let x = Expr::variable("x", Shape::vector(n));
    let f = Expr::parameter("F", Shape::matrix(m, n));
    let g = Expr::parameter("g", Shape::vector(m));
    let lambda = Expr::parameter_with("lambda", Shape::scalar(), LeafAttrs::NONNEG);
    let obj = ok(ok(ok(f.matmul(&x)).sub(&g)).norm2().add(&ok(lambda.mul(&x.norm2()))));
    let cons = vec![ok(Constraint::ge(&x, &Expr::scalar(0.0)))];
    ok(Problem::new(Sense::Minimize, obj, cons))
}

/// Smallest strict-complementarity margin of a solution: `s + y` must lie in
/// the interior of each nonneg and second-order block. Zero-cone rows impose
/// nothing. A positive margin means the solution map is differentiable there.
pub fn complementarity_margin(data: &ConeProgramData, sol: &ConeSolution) -> f64 {
    let cones = &data.cones;
    let sum: Vec<f64> = sol.s.iter().zip(&sol.y).map(|(s, y)| s + y).collect();
    let mut margin = f64::INFINITY;
    let mut off = cones.zero;
    for v in &sum[off..off + cones.nonneg] {
        margin = margin.min(*v);
    }
    off += cones.nonneg;
    for &d in &cones.soc {
        let block = &sum[off..off + d];
        let tail = block[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        margin = margin.min(block[0] - tail);
        off += d;
    }
    margin
}
