//! Numeric evaluation of expression trees.

use crate::array::{Array, Values};
use crate::shape::Shape;

use super::{Atom, Expr, Leaf, Node};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("no value bound for `{0}`")]
    Unbound(String),
    #[error("value for `{name}` has shape {found}, expected {expected}")]
    Shape {
        name: String,
        expected: Shape,
        found: Shape,
    },
}

/// Evaluates `expr` with variables looked up in `vars` and parameters in `params`.
pub fn evaluate(expr: &Expr, vars: &Values, params: &Values) -> Result<Array, EvalError> {
    match expr.node() {
        Node::Leaf(leaf) => {
            let (name, shape, table) = match leaf {
                Leaf::Constant(a) => return Ok(a.clone()),
                Leaf::Variable { name, shape, .. } => (name, shape, vars),
                Leaf::Parameter { name, shape, .. } => (name, shape, params),
            };
            let v = table.get(name).ok_or_else(|| EvalError::Unbound(name.clone()))?;
            if v.shape() != shape {
                return Err(EvalError::Shape {
                    name: name.clone(),
                    expected: shape.clone(),
                    found: v.shape().clone(),
                });
            }
            Ok(v.clone())
        }
        Node::Apply { atom, args } => {
            let vals = args
                .iter()
                .map(|a| evaluate(a, vars, params))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(apply(atom, &vals, expr.shape()))
        }
    }
}

fn apply(atom: &Atom, args: &[Array], out: &Shape) -> Array {
    let build = |data: Vec<f64>| Array::new(out.clone(), data).expect("shape rule guarantees size");
    let zip = |f: fn(f64, f64) -> f64| -> Vec<f64> {
        args[0]
            .data()
            .iter()
            .zip(args[1].data())
            .map(|(a, b)| f(*a, *b))
            .collect()
    };
    match atom {
        Atom::Add => {
            let mut data = vec![0.0; out.size()];
            for a in args {
                data.iter_mut().zip(a.data()).for_each(|(d, v)| *d += v);
            }
            build(data)
        }
        Atom::Neg => build(args[0].data().iter().map(|v| -v).collect()),
        Atom::MulElem => build(zip(|a, b| a * b)),
        Atom::Maximum => build(zip(f64::max)),
        Atom::Abs => build(args[0].data().iter().map(|v| v.abs()).collect()),
        Atom::Sum => build(vec![args[0].data().iter().sum()]),
        Atom::Norm2 => build(vec![args[0].data().iter().map(|v| v * v).sum::<f64>().sqrt()]),
        Atom::SumSquares => build(vec![args[0].data().iter().map(|v| v * v).sum()]),
        Atom::Promote(_) => build(vec![args[0].data()[0]; out.size()]),
        Atom::MatMul => {
            let shapes = [args[0].shape(), args[1].shape()];
            let mut data = vec![0.0; out.size()];
            for (o, other, coef) in atom.product_pattern(shapes[0], shapes[1], true) {
                data[o] += args[0].data()[coef] * args[1].data()[other];
            }
            build(data)
        }
        _ => {
            // Remaining atoms are pure rearrangements.
            let shapes: Vec<&Shape> = args.iter().map(Array::shape).collect();
            let mut data = vec![0.0; out.size()];
            for (arg, entries) in args.iter().zip(atom.linear_action(&shapes, out)) {
                for (o, i, c) in entries {
                    data[o] += c * arg.data()[i];
                }
            }
            build(data)
        }
    }
}
