//! Random DPP problems built by sampling atoms under the composition rules.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::array::Array;
use crate::expr::{Constraint, Expr, LeafAttrs, Node, Problem, Sense};
use crate::shape::Shape;

/// Upper limits for [`gen_random_dpp`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomSizes {
    pub max_variables: usize,
    pub max_parameters: usize,
    /// Longest root-to-leaf path counted in atoms.
    pub max_depth: usize,
    /// Largest dimension of any declared leaf.
    pub max_dim: usize,
    pub max_constraints: usize,
}

impl Default for RandomSizes {
    fn default() -> Self {
        RandomSizes {
            max_variables: 4,
            max_parameters: 3,
            max_depth: 6,
            max_dim: 3,
            max_constraints: 3,
        }
    }
}

/// Atom nesting depth; leaves have depth 0.
pub fn depth(e: &Expr) -> usize {
    match e.node() {
        Node::Leaf(_) => 0,
        Node::Apply { args, .. } => 1 + args.iter().map(depth).max().unwrap_or(0),
    }
}

fn problem_depth(p: &Problem) -> usize {
    p.constraints()
        .iter()
        .flat_map(|c| [depth(c.lhs()), depth(c.rhs())])
        .chain([depth(p.objective())])
        .max()
        .unwrap_or(0)
}

struct Gen {
    rng: ChaCha8Rng,
    vars: Vec<Expr>,
    params: Vec<Expr>,
    max_dim: usize,
}

impl Gen {
    fn shape(&mut self) -> Shape {
        let d = self.max_dim;
        match self.rng.random_range(0..3) {
            0 => Shape::scalar(),
            1 => Shape::vector(self.rng.random_range(1..=d)),
            _ => Shape::matrix(self.rng.random_range(1..=d), self.rng.random_range(1..=d)),
        }
    }

    fn constant(&mut self, shape: Shape) -> Expr {
        let data = (0..shape.size())
            .map(|_| (self.rng.random_range(-20..=20) as f64) / 10.0)
            .collect();
        Expr::constant(Array::new(shape, data).expect("sized"))
    }

    /// Affine image of `leaf` (any shape) with the target shape, using only
    /// constant coefficients.
    fn map_to(&mut self, leaf: &Expr, shape: &Shape) -> Expr {
        if leaf.shape() == shape {
            return leaf.clone();
        }
        if leaf.shape().is_scalar() {
            return leaf.broadcast_to(shape).expect("scalars promote");
        }
        let c = self.constant(Shape::matrix(shape.size(), leaf.shape().size()));
        let v = c.matmul(&leaf.vec()).expect("conforming");
        if shape.rank() == 1 {
            v
        } else {
            v.reshape(shape.clone()).expect("same size")
        }
    }

    fn param_affine(&mut self, shape: &Shape) -> Option<Expr> {
        let p = self.params.choose(&mut self.rng)?.clone();
        Some(self.map_to(&p, shape))
    }

    fn affine_leaf(&mut self, shape: &Shape, budget: usize, param_free: bool) -> Expr {
        let exact: Vec<Expr> = self.vars.iter().filter(|v| v.shape() == shape).cloned().collect();
        let pool = if !exact.is_empty() && self.rng.random::<bool>() {
            &exact
        } else {
            &self.vars
        };
        let v = pool.choose(&mut self.rng).expect("at least one variable").clone();
        let mut e = self.map_to(&v, shape);
        if depth(&e) >= budget {
            return e;
        }
        match self.rng.random_range(0..3) {
            0 => e = e.add(&self.constant(shape.clone())).expect("same shape"),
            1 if !param_free => {
                if let Some(p) = self.param_affine(shape) {
                    e = e.add(&p).expect("same shape");
                }
            }
            _ => {}
        }
        e
    }

    /// Affine in the variables; parameter-free when requested.
    fn affine(&mut self, shape: &Shape, budget: usize, param_free: bool) -> Expr {
        if budget <= 2 {
            return self.affine_leaf(shape, budget, param_free);
        }
        let b = budget - 1;
        match self.rng.random_range(0..9) {
            0 => {
                let l = self.affine(shape, b, param_free);
                let r = self.affine(shape, b, param_free);
                l.add(&r).expect("same shape")
            }
            1 => self.affine(shape, b, param_free).neg(),
            2 if !param_free && !self.params.is_empty() => {
                let coef = self.param_affine(shape).expect("nonempty");
                coef.mul(&self.affine(shape, b, true)).expect("same shape")
            }
            3 if !param_free && !self.params.is_empty() && !shape.is_scalar() => {
                // Parameter matrix times a parameter-free argument.
                let k = self.rng.random_range(1..=self.max_dim);
                let (lshape, rshape) = if shape.rank() == 1 {
                    (Shape::matrix(shape.rows(), k), Shape::vector(k))
                } else {
                    (Shape::matrix(shape.rows(), k), Shape::matrix(k, shape.cols()))
                };
                let coef = self.param_affine(&lshape).expect("nonempty");
                coef.matmul(&self.affine(&rshape, b, true)).expect("conforming")
            }
            4 if shape.rank() == 2 => self.affine(&shape.transposed(), b, param_free).t(),
            5 if shape.is_scalar() => {
                let s = self.shape();
                self.affine(&s, b, param_free).sum()
            }
            6 if shape.rank() == 1 && shape.rows() >= 2 => {
                let k = self.rng.random_range(1..shape.rows());
                let top = self.affine(&Shape::vector(k), b, param_free);
                let bottom = self.affine(&Shape::vector(shape.rows() - k), b, param_free);
                Expr::vstack(&[top, bottom]).expect("vectors stack")
            }
            7 if shape.rank() == 1 => {
                let n = shape.rows();
                let bigger = self.affine(&Shape::vector(n + 1), b, param_free);
                let start = self.rng.random_range(0..2);
                bigger.index((start, start + n), (0, 1)).expect("in range")
            }
            _ => self.affine_leaf(shape, budget, param_free),
        }
    }

    fn nonneg_param_scalar(&mut self) -> Option<Expr> {
        let nonneg: Vec<Expr> = self.params.iter().filter(|p| p.sign().is_nonneg()).cloned().collect();
        nonneg.choose(&mut self.rng).map(|p| p.sum())
    }

    fn convex(&mut self, shape: &Shape, budget: usize, param_free: bool) -> Expr {
        if budget <= 2 {
            return self.affine(shape, budget, param_free);
        }
        let b = budget - 1;
        match self.rng.random_range(0..8) {
            0 => {
                let l = self.convex(shape, b, param_free);
                let r = self.convex(shape, b, param_free);
                l.add(&r).expect("same shape")
            }
            1 => self.affine(shape, b, param_free).abs(),
            2 => {
                let l = self.convex(shape, b, param_free);
                let r = self.convex(shape, b, param_free);
                l.maximum(&r).expect("same shape")
            }
            3 => {
                let s = self.shape();
                let inner = self.affine(&s, b, param_free);
                let e = if self.rng.random::<bool>() {
                    inner.norm2()
                } else {
                    inner.sum_squares()
                };
                e.broadcast_to(shape).expect("scalars promote")
            }
            4 if shape.is_scalar() => {
                let s = self.shape();
                self.convex(&s, b, param_free).sum()
            }
            5 if !param_free => match self.nonneg_param_scalar() {
                Some(p) => p.mul(&self.convex(shape, b, true)).expect("scalar broadcast"),
                None => self.convex(shape, b, true).scale(1.5),
            },
            6 if shape.rank() == 2 => self.convex(&shape.transposed(), b, param_free).t(),
            _ => self.affine(shape, b, param_free),
        }
    }
}

/// A random problem that satisfies the DPP rules. The same seed and sizes
/// always give the same problem.
pub fn gen_random_dpp(seed: u64, sizes: RandomSizes) -> Problem {
    assert!(
        sizes.max_variables >= 1 && sizes.max_depth >= 3 && sizes.max_dim >= 1,
        "sizes must be at least 1 (depth at least 3)"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let seed = rng.random();
        if let Some(p) = attempt(seed, sizes) {
            if problem_depth(&p) <= sizes.max_depth {
                return p;
            }
        }
    }
}

fn attempt(seed: u64, sizes: RandomSizes) -> Option<Problem> {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        vars: Vec::new(),
        params: Vec::new(),
        max_dim: sizes.max_dim,
    };
    let nv = g.rng.random_range(1..=sizes.max_variables);
    for i in 0..nv {
        let s = g.shape();
        g.vars.push(Expr::variable(&format!("x{i}"), s));
    }
    let np = g.rng.random_range(0..=sizes.max_parameters);
    for i in 0..np {
        let s = g.shape();
        let attrs = if g.rng.random::<bool>() {
            LeafAttrs::NONNEG
        } else {
            LeafAttrs::NONE
        };
        g.params.push(Expr::parameter_with(&format!("p{i}"), s, attrs));
    }
    let budget = sizes.max_depth - 1;
    let (sense, objective) = if g.rng.random_range(0..4) == 0 {
        (Sense::Maximize, g.convex(&Shape::scalar(), budget, false).neg())
    } else {
        (Sense::Minimize, g.convex(&Shape::scalar(), budget, false))
    };
    let nc = g.rng.random_range(0..=sizes.max_constraints);
    let mut constraints = Vec::with_capacity(nc);
    for _ in 0..nc {
        let s = g.shape();
        let c = match g.rng.random_range(0..3) {
            0 => Constraint::le(&g.convex(&s, budget, false), &g.affine(&s, budget, false)),
            1 => Constraint::eq(&g.affine(&s, budget, false), &g.affine(&s, budget, false)),
            _ => Constraint::ge(&g.affine(&s, budget, false), &g.convex(&s, budget, false)),
        };
        constraints.push(c.ok()?);
    }
    Problem::new(sense, objective, constraints).ok()
}
