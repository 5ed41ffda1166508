//! Expression trees over variables, parameters and constants.
//!
//! Every node is annotated at construction with its curvature, sign and parameter
//! classification under the parametrized (DPP) rules, so analysis never needs to
//! walk a tree twice.

pub(crate) mod analysis;
pub mod atom;
pub mod dpp;
pub mod eval;
pub mod problem;

use std::fmt;
use std::sync::Arc;

use crate::array::Array;
use crate::shape::Shape;

pub use atom::{Atom, AtomId};
pub use dpp::{check_dpp, classify, is_dcp, DppReport, Violation};
pub use eval::{evaluate, EvalError};
pub use problem::{Constraint, Declaration, Problem, ProblemError, Relation, Sense};

use analysis::{Info, Rules};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct LeafAttrs {
    pub nonneg: bool,
    pub nonpos: bool,
}

impl LeafAttrs {
    pub const NONE: LeafAttrs = LeafAttrs {
        nonneg: false,
        nonpos: false,
    };
    pub const NONNEG: LeafAttrs = LeafAttrs {
        nonneg: true,
        nonpos: false,
    };
    pub const NONPOS: LeafAttrs = LeafAttrs {
        nonneg: false,
        nonpos: true,
    };
}

#[derive(Clone, Debug, PartialEq)]
pub enum Leaf {
    Variable {
        name: String,
        shape: Shape,
        attrs: LeafAttrs,
    },
    Parameter {
        name: String,
        shape: Shape,
        attrs: LeafAttrs,
    },
    Constant(Array),
}

impl Leaf {
    pub fn shape(&self) -> &Shape {
        match self {
            Leaf::Variable { shape, .. } | Leaf::Parameter { shape, .. } => shape,
            Leaf::Constant(a) => a.shape(),
        }
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            Leaf::Variable { name, .. } | Leaf::Parameter { name, .. } => Some(name),
            Leaf::Constant(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Curvature {
    Constant,
    Affine,
    Convex,
    Concave,
    Unknown,
}

impl Curvature {
    pub fn is_affine(self) -> bool {
        matches!(self, Curvature::Constant | Curvature::Affine)
    }

    pub fn is_convex(self) -> bool {
        self.is_affine() || self == Curvature::Convex
    }

    pub fn is_concave(self) -> bool {
        self.is_affine() || self == Curvature::Concave
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Zero,
    Nonneg,
    Nonpos,
    Unknown,
}

impl Sign {
    pub fn is_nonneg(self) -> bool {
        matches!(self, Sign::Zero | Sign::Nonneg)
    }

    pub fn is_nonpos(self) -> bool {
        matches!(self, Sign::Zero | Sign::Nonpos)
    }
}

/// Parameter/variable classification of an expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Classification {
    pub parameter_free: bool,
    pub variable_free: bool,
    pub parameter_affine: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Leaf(Leaf),
    Apply { atom: Atom, args: Vec<Expr> },
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("{atom}: cannot apply to shapes [{}]: {reason}", fmt_shapes(.shapes))]
    Shape {
        atom: AtomId,
        shapes: Vec<Shape>,
        reason: String,
    },
    #[error("invalid leaf: {0}")]
    Leaf(String),
}

fn fmt_shapes(shapes: &[Shape]) -> String {
    shapes.iter().map(Shape::to_string).collect::<Vec<_>>().join(", ")
}

struct Inner {
    node: Node,
    shape: Shape,
    info: Info,
}

/// Immutable, cheaply clonable expression tree.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.node == other.0.node
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.node {
            Node::Leaf(Leaf::Variable { name, .. }) => write!(f, "{name}"),
            Node::Leaf(Leaf::Parameter { name, .. }) => write!(f, "${name}"),
            Node::Leaf(Leaf::Constant(a)) if a.shape().is_scalar() => write!(f, "{}", a.data()[0]),
            Node::Leaf(Leaf::Constant(a)) => write!(f, "const{}", a.shape()),
            Node::Apply { atom, args } => {
                write!(f, "{atom}(")?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a:?}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Expr {
    pub fn leaf(leaf: Leaf) -> Result<Expr, ExprError> {
        match &leaf {
            Leaf::Variable { name, .. } | Leaf::Parameter { name, .. } if name.is_empty() => {
                return Err(ExprError::Leaf("empty name".into()));
            }
            Leaf::Constant(a) if !a.is_finite() => {
                return Err(ExprError::Leaf("constant contains non-finite values".into()));
            }
            _ => {}
        }
        let info = analysis::leaf_info(&leaf, Rules::Dpp);
        let shape = leaf.shape().clone();
        Ok(Expr(Arc::new(Inner {
            node: Node::Leaf(leaf),
            shape,
            info,
        })))
    }

    pub fn variable(name: &str, shape: Shape) -> Expr {
        Self::variable_with(name, shape, LeafAttrs::NONE)
    }

    /// # Panics
    /// On an empty name.
    pub fn variable_with(name: &str, shape: Shape, attrs: LeafAttrs) -> Expr {
        Expr::leaf(Leaf::Variable {
            name: name.to_string(),
            shape,
            attrs,
        })
        .expect("variable names must be non-empty")
    }

    pub fn parameter(name: &str, shape: Shape) -> Expr {
        Self::parameter_with(name, shape, LeafAttrs::NONE)
    }

    /// # Panics
    /// On an empty name.
    pub fn parameter_with(name: &str, shape: Shape, attrs: LeafAttrs) -> Expr {
        Expr::leaf(Leaf::Parameter {
            name: name.to_string(),
            shape,
            attrs,
        })
        .expect("parameter names must be non-empty")
    }

    /// # Panics
    /// If the array holds non-finite values.
    pub fn constant(value: Array) -> Expr {
        Expr::leaf(Leaf::Constant(value)).expect("constants must be finite")
    }

    pub fn scalar(value: f64) -> Expr {
        Expr::constant(Array::scalar(value))
    }

    /// Builds an annotated node after checking the atom's shape rule.
    pub fn make_node(atom: Atom, args: Vec<Expr>) -> Result<Expr, ExprError> {
        let shapes: Vec<&Shape> = args.iter().map(|a| &a.0.shape).collect();
        let shape = atom.output_shape(&shapes).map_err(|reason| ExprError::Shape {
            atom: atom.id(),
            shapes: shapes.iter().map(|s| (*s).clone()).collect(),
            reason,
        })?;
        let infos: Vec<Info> = args.iter().map(|a| a.0.info).collect();
        let (info, _) = analysis::infer(&atom, &infos, Rules::Dpp);
        Ok(Expr(Arc::new(Inner {
            node: Node::Apply { atom, args },
            shape,
            info,
        })))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn shape(&self) -> &Shape {
        &self.0.shape
    }

    pub fn curvature(&self) -> Curvature {
        self.0.info.curvature
    }

    pub fn sign(&self) -> Sign {
        self.0.info.sign
    }

    pub fn classification(&self) -> Classification {
        self.0.info.class
    }

    pub(crate) fn info(&self) -> Info {
        self.0.info
    }

    pub fn args(&self) -> &[Expr] {
        match &self.0.node {
            Node::Apply { args, .. } => args,
            Node::Leaf(_) => &[],
        }
    }

    pub fn as_leaf(&self) -> Option<&Leaf> {
        match &self.0.node {
            Node::Leaf(l) => Some(l),
            Node::Apply { .. } => None,
        }
    }

    /// Leaves in depth-first, left-to-right order (with repetition).
    pub fn leaves(&self) -> Vec<&Leaf> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Leaf>) {
        match &self.0.node {
            Node::Leaf(l) => out.push(l),
            Node::Apply { args, .. } => args.iter().for_each(|a| a.collect_leaves(out)),
        }
    }

    /// Rebuilds the tree, replacing leaves for which `f` returns a substitute.
    pub fn map_leaves(&self, f: &impl Fn(&Leaf) -> Option<Expr>) -> Result<Expr, ExprError> {
        match &self.0.node {
            Node::Leaf(l) => Ok(f(l).unwrap_or_else(|| self.clone())),
            Node::Apply { atom, args } => {
                let args = args.iter().map(|a| a.map_leaves(f)).collect::<Result<Vec<_>, _>>()?;
                Expr::make_node(atom.clone(), args)
            }
        }
    }

    /// Promotes a scalar to `shape` when needed.
    pub fn broadcast_to(&self, shape: &Shape) -> Result<Expr, ExprError> {
        if self.shape() == shape {
            Ok(self.clone())
        } else {
            Expr::make_node(Atom::Promote(shape.clone()), vec![self.clone()])
        }
    }

    fn broadcast_pair(&self, other: &Expr) -> Result<(Expr, Expr), ExprError> {
        match (self.shape().is_scalar(), other.shape().is_scalar()) {
            (true, false) => Ok((self.broadcast_to(other.shape())?, other.clone())),
            (false, true) => Ok((self.clone(), other.broadcast_to(self.shape())?)),
            _ => Ok((self.clone(), other.clone())),
        }
    }

    pub fn add(&self, other: &Expr) -> Result<Expr, ExprError> {
        let (a, b) = self.broadcast_pair(other)?;
        Expr::make_node(Atom::Add, vec![a, b])
    }

    pub fn sub(&self, other: &Expr) -> Result<Expr, ExprError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Expr {
        Expr::make_node(Atom::Neg, vec![self.clone()]).expect("neg accepts any shape")
    }

    pub fn matmul(&self, other: &Expr) -> Result<Expr, ExprError> {
        Expr::make_node(Atom::MatMul, vec![self.clone(), other.clone()])
    }

    /// Elementwise product, promoting a scalar operand.
    pub fn mul(&self, other: &Expr) -> Result<Expr, ExprError> {
        let (a, b) = self.broadcast_pair(other)?;
        Expr::make_node(Atom::MulElem, vec![a, b])
    }

    pub fn scale(&self, factor: f64) -> Expr {
        Expr::scalar(factor).mul(self).expect("scalar factors always broadcast")
    }

    pub fn sum(&self) -> Expr {
        Expr::make_node(Atom::Sum, vec![self.clone()]).expect("sum accepts any shape")
    }

    /// Slices a vector (`cols` ignored) or matrix with half-open ranges.
    pub fn index(&self, rows: (usize, usize), cols: (usize, usize)) -> Result<Expr, ExprError> {
        let cols = if self.shape().rank() == 1 { (0, 1) } else { cols };
        Expr::make_node(Atom::Index { rows, cols }, vec![self.clone()])
    }

    pub fn reshape(&self, shape: Shape) -> Result<Expr, ExprError> {
        Expr::make_node(Atom::Reshape(shape), vec![self.clone()])
    }

    /// Column-major flattening into a vector.
    pub fn vec(&self) -> Expr {
        if self.shape().rank() == 1 {
            return self.clone();
        }
        self.reshape(Shape::vector(self.shape().size()))
            .expect("flattening preserves size")
    }

    pub fn t(&self) -> Expr {
        Expr::make_node(Atom::Transpose, vec![self.clone()]).expect("transpose accepts any shape")
    }

    pub fn vstack(parts: &[Expr]) -> Result<Expr, ExprError> {
        Expr::make_node(Atom::VStack, parts.to_vec())
    }

    pub fn hstack(parts: &[Expr]) -> Result<Expr, ExprError> {
        Expr::make_node(Atom::HStack, parts.to_vec())
    }

    pub fn norm2(&self) -> Expr {
        Expr::make_node(Atom::Norm2, vec![self.clone()]).expect("norm2 accepts any shape")
    }

    pub fn sum_squares(&self) -> Expr {
        Expr::make_node(Atom::SumSquares, vec![self.clone()]).expect("sum_squares accepts any shape")
    }

    pub fn abs(&self) -> Expr {
        Expr::make_node(Atom::Abs, vec![self.clone()]).expect("abs accepts any shape")
    }

    pub fn maximum(&self, other: &Expr) -> Result<Expr, ExprError> {
        let (a, b) = self.broadcast_pair(other)?;
        Expr::make_node(Atom::Maximum, vec![a, b])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x2() -> Expr {
        Expr::variable("x", Shape::vector(2))
    }

    #[test]
    fn nonneg_parameter_times_norm_is_convex() {
        let lambda = Expr::parameter_with("lambda", Shape::scalar(), LeafAttrs::NONNEG);
        let e = lambda.mul(&x2().norm2()).unwrap();
        assert_eq!(e.curvature(), Curvature::Convex);
    }

    #[test]
    fn adding_zero_keeps_affine_unknown_sign() {
        let zero = Expr::constant(Array::vector(vec![0.0, 0.0]));
        let e = Expr::make_node(Atom::Add, vec![zero, x2()]).unwrap();
        assert_eq!(e.curvature(), Curvature::Affine);
        assert_eq!(e.sign(), Sign::Unknown);
    }

    #[test]
    fn product_of_two_parameters_is_unknown() {
        let p1 = Expr::parameter("p1", Shape::scalar());
        let p2 = Expr::parameter("p2", Shape::scalar());
        assert_eq!(p1.mul(&p2).unwrap().curvature(), Curvature::Unknown);
    }

    #[test]
    fn unknown_sign_parameter_times_norm_is_unknown() {
        let p = Expr::parameter("p", Shape::scalar());
        assert_eq!(p.mul(&x2().norm2()).unwrap().curvature(), Curvature::Unknown);
        let np = Expr::parameter_with("p", Shape::scalar(), LeafAttrs::NONPOS);
        assert_eq!(np.mul(&x2().norm2()).unwrap().curvature(), Curvature::Concave);
    }

    #[test]
    fn shape_errors_name_the_atom() {
        let a = Expr::variable("a", Shape::vector(3));
        let err = x2().add(&a).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("add") && msg.contains("(2,)") && msg.contains("(3,)"),
            "{msg}"
        );
    }

    #[test]
    fn norm_of_convex_nonneg_argument() {
        // norm2 is nondecreasing on nonneg arguments, so norm2(abs(x)) is convex.
        assert_eq!(x2().abs().norm2().curvature(), Curvature::Convex);
        // ...but norm2(norm2(x) - 1) is not.
        let inner = x2().norm2().sub(&Expr::scalar(1.0)).unwrap();
        assert_eq!(inner.norm2().curvature(), Curvature::Unknown);
    }

    #[test]
    fn variable_times_variable_is_unknown() {
        assert_eq!(x2().mul(&x2()).unwrap().curvature(), Curvature::Unknown);
    }
}
