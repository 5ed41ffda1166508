//! The fixed atom library: shape rules and the linear action of affine atoms.

use std::fmt;

use crate::shape::Shape;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomId {
    Add,
    Neg,
    MatMul,
    MulElem,
    Sum,
    Index,
    Reshape,
    Transpose,
    VStack,
    HStack,
    Promote,
    Norm2,
    SumSquares,
    Abs,
    Maximum,
}

impl AtomId {
    pub const ALL: [AtomId; 15] = [
        AtomId::Add,
        AtomId::Neg,
        AtomId::MatMul,
        AtomId::MulElem,
        AtomId::Sum,
        AtomId::Index,
        AtomId::Reshape,
        AtomId::Transpose,
        AtomId::VStack,
        AtomId::HStack,
        AtomId::Promote,
        AtomId::Norm2,
        AtomId::SumSquares,
        AtomId::Abs,
        AtomId::Maximum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AtomId::Add => "add",
            AtomId::Neg => "neg",
            AtomId::MatMul => "matmul",
            AtomId::MulElem => "mul_elem",
            AtomId::Sum => "sum",
            AtomId::Index => "index",
            AtomId::Reshape => "reshape",
            AtomId::Transpose => "transpose",
            AtomId::VStack => "vstack",
            AtomId::HStack => "hstack",
            AtomId::Promote => "promote",
            AtomId::Norm2 => "norm2",
            AtomId::SumSquares => "sum_squares",
            AtomId::Abs => "abs",
            AtomId::Maximum => "maximum",
        }
    }

    pub fn from_name(name: &str) -> Option<AtomId> {
        AtomId::ALL.into_iter().find(|a| a.name() == name)
    }

    /// Affine atoms are linear in their arguments (products are bilinear).
    pub fn is_affine(self) -> bool {
        !matches!(self, AtomId::Norm2 | AtomId::SumSquares | AtomId::Abs | AtomId::Maximum)
    }

    pub fn is_product(self) -> bool {
        matches!(self, AtomId::MatMul | AtomId::MulElem)
    }
}

impl fmt::Display for AtomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An atom together with its static attributes (index ranges, target shapes).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Atom {
    Add,
    Neg,
    MatMul,
    MulElem,
    Sum,
    /// Half-open row and column ranges. Vectors use `cols = (0, 1)`.
    Index {
        rows: (usize, usize),
        cols: (usize, usize),
    },
    Reshape(Shape),
    Transpose,
    VStack,
    HStack,
    Promote(Shape),
    Norm2,
    SumSquares,
    Abs,
    Maximum,
}

impl Atom {
    pub fn id(&self) -> AtomId {
        match self {
            Atom::Add => AtomId::Add,
            Atom::Neg => AtomId::Neg,
            Atom::MatMul => AtomId::MatMul,
            Atom::MulElem => AtomId::MulElem,
            Atom::Sum => AtomId::Sum,
            Atom::Index { .. } => AtomId::Index,
            Atom::Reshape(_) => AtomId::Reshape,
            Atom::Transpose => AtomId::Transpose,
            Atom::VStack => AtomId::VStack,
            Atom::HStack => AtomId::HStack,
            Atom::Promote(_) => AtomId::Promote,
            Atom::Norm2 => AtomId::Norm2,
            Atom::SumSquares => AtomId::SumSquares,
            Atom::Abs => AtomId::Abs,
            Atom::Maximum => AtomId::Maximum,
        }
    }

    /// Applies the shape rule. The error string explains the mismatch.
    pub fn output_shape(&self, args: &[&Shape]) -> Result<Shape, String> {
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("expected {n} argument(s), got {}", args.len()))
            }
        };
        match self {
            Atom::Add => {
                if args.is_empty() {
                    return Err("expected at least one argument".into());
                }
                if args.iter().any(|s| *s != args[0]) {
                    return Err("all summands must have the same shape".into());
                }
                Ok(args[0].clone())
            }
            Atom::Neg | Atom::Abs => {
                arity(1)?;
                Ok(args[0].clone())
            }
            Atom::Sum | Atom::Norm2 | Atom::SumSquares => {
                arity(1)?;
                Ok(Shape::scalar())
            }
            Atom::MulElem | Atom::Maximum => {
                arity(2)?;
                if args[0] != args[1] {
                    return Err("elementwise arguments must have the same shape".into());
                }
                Ok(args[0].clone())
            }
            Atom::MatMul => {
                arity(2)?;
                let (a, b) = (args[0], args[1]);
                if a.is_scalar() || b.is_scalar() {
                    return Err("matmul does not accept scalars; use mul_elem".into());
                }
                let (_, aq) = matmul_view_left(a);
                let (bq, _) = matmul_view_right(b);
                if aq != bq {
                    return Err(format!("inner dimensions differ ({aq} vs {bq})"));
                }
                Ok(match (a.rank(), b.rank()) {
                    (2, 2) => Shape::matrix(a.rows(), b.cols()),
                    (2, 1) => Shape::vector(a.rows()),
                    (1, 2) => Shape::vector(b.cols()),
                    _ => Shape::scalar(),
                })
            }
            Atom::Index { rows, cols } => {
                arity(1)?;
                let a = args[0];
                if a.is_scalar() {
                    return Err("cannot index a scalar".into());
                }
                let valid = |r: &(usize, usize), n: usize| r.0 < r.1 && r.1 <= n;
                if !valid(rows, a.rows()) || !valid(cols, a.cols()) {
                    return Err(format!(
                        "index range rows {}..{} cols {}..{} out of bounds",
                        rows.0, rows.1, cols.0, cols.1
                    ));
                }
                if a.rank() == 1 {
                    Ok(Shape::vector(rows.1 - rows.0))
                } else {
                    Ok(Shape::matrix(rows.1 - rows.0, cols.1 - cols.0))
                }
            }
            Atom::Reshape(target) => {
                arity(1)?;
                if target.size() != args[0].size() {
                    return Err(format!("cannot reshape {} into {target}", args[0]));
                }
                Ok(target.clone())
            }
            Atom::Transpose => {
                arity(1)?;
                Ok(args[0].transposed())
            }
            Atom::VStack | Atom::HStack => {
                if args.is_empty() {
                    return Err("expected at least one argument".into());
                }
                if args.iter().all(|s| s.rank() <= 1) {
                    return Ok(Shape::vector(args.iter().map(|s| s.size()).sum()));
                }
                if args.iter().any(|s| s.rank() != 2) {
                    return Err("cannot mix matrices with vectors or scalars".into());
                }
                if *self == Atom::VStack {
                    let cols = args[0].cols();
                    if args.iter().any(|s| s.cols() != cols) {
                        return Err("vstack operands need equal column counts".into());
                    }
                    Ok(Shape::matrix(args.iter().map(|s| s.rows()).sum(), cols))
                } else {
                    let rows = args[0].rows();
                    if args.iter().any(|s| s.rows() != rows) {
                        return Err("hstack operands need equal row counts".into());
                    }
                    Ok(Shape::matrix(rows, args.iter().map(|s| s.cols()).sum()))
                }
            }
            Atom::Promote(target) => {
                arity(1)?;
                if !args[0].is_scalar() {
                    return Err("only scalars can be promoted".into());
                }
                Ok(target.clone())
            }
        }
    }

    /// For non-product affine atoms: per argument, the entries `(out, in, coef)` of the
    /// constant matrix `L_i` with `vec(out) = sum_i L_i vec(arg_i)`.
    pub(crate) fn linear_action(&self, args: &[&Shape], out: &Shape) -> Vec<Vec<(usize, usize, f64)>> {
        match self {
            Atom::Add => args
                .iter()
                .map(|s| (0..s.size()).map(|k| (k, k, 1.0)).collect())
                .collect(),
            Atom::Neg => vec![(0..args[0].size()).map(|k| (k, k, -1.0)).collect()],
            Atom::Sum => vec![(0..args[0].size()).map(|k| (0, k, 1.0)).collect()],
            Atom::Reshape(_) => vec![(0..args[0].size()).map(|k| (k, k, 1.0)).collect()],
            Atom::Promote(_) => vec![(0..out.size()).map(|k| (k, 0, 1.0)).collect()],
            Atom::Transpose => {
                let a = args[0];
                if a.rank() < 2 {
                    return vec![(0..a.size()).map(|k| (k, k, 1.0)).collect()];
                }
                let (r, c) = (a.rows(), a.cols());
                let mut v = Vec::with_capacity(r * c);
                for j in 0..c {
                    for i in 0..r {
                        // out is c x r
                        v.push((j + i * c, i + j * r, 1.0));
                    }
                }
                vec![v]
            }
            Atom::Index { rows, cols } => {
                let a = args[0];
                let nr = rows.1 - rows.0;
                let mut v = Vec::new();
                for j in 0..(cols.1 - cols.0) {
                    for i in 0..nr {
                        v.push((i + j * nr, (rows.0 + i) + (cols.0 + j) * a.rows(), 1.0));
                    }
                }
                vec![v]
            }
            Atom::VStack if out.rank() == 2 => {
                let total_rows = out.rows();
                let mut row_off = 0;
                args.iter()
                    .map(|s| {
                        let mut v = Vec::with_capacity(s.size());
                        for j in 0..s.cols() {
                            for i in 0..s.rows() {
                                v.push((row_off + i + j * total_rows, i + j * s.rows(), 1.0));
                            }
                        }
                        row_off += s.rows();
                        v
                    })
                    .collect()
            }
            // Vector concatenation, and hstack of matrices (contiguous column blocks).
            Atom::VStack | Atom::HStack => {
                let mut off = 0;
                args.iter()
                    .map(|s| {
                        let v = (0..s.size()).map(|k| (off + k, k, 1.0)).collect();
                        off += s.size();
                        v
                    })
                    .collect()
            }
            Atom::MatMul | Atom::MulElem | Atom::Norm2 | Atom::SumSquares | Atom::Abs | Atom::Maximum => {
                panic!("{} has no constant linear action", self.id())
            }
        }
    }

    /// Bilinear pattern of a product atom as `(out, other, coef)` flat indices, where
    /// `coef` indexes the coefficient argument (left when `coef_left`).
    pub(crate) fn product_pattern(&self, left: &Shape, right: &Shape, coef_left: bool) -> Vec<(usize, usize, usize)> {
        match self {
            Atom::MulElem => (0..left.size()).map(|k| (k, k, k)).collect(),
            Atom::MatMul => {
                let (r, q) = matmul_view_left(left);
                let (_, s) = matmul_view_right(right);
                let mut v = Vec::with_capacity(r * q * s);
                for l in 0..s {
                    for mm in 0..q {
                        for i in 0..r {
                            let out = i + l * r;
                            let a_idx = i + mm * r;
                            let b_idx = mm + l * q;
                            if coef_left {
                                v.push((out, b_idx, a_idx));
                            } else {
                                v.push((out, a_idx, b_idx));
                            }
                        }
                    }
                }
                v
            }
            _ => panic!("{} is not a product atom", self.id()),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id().name())
    }
}

// Vectors act as row vectors on the left of a matmul and as columns on the right.
fn matmul_view_left(s: &Shape) -> (usize, usize) {
    if s.rank() == 1 {
        (1, s.size())
    } else {
        (s.rows(), s.cols())
    }
}

fn matmul_view_right(s: &Shape) -> (usize, usize) {
    if s.rank() == 1 {
        (s.size(), 1)
    } else {
        (s.rows(), s.cols())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for id in AtomId::ALL {
            assert_eq!(AtomId::from_name(id.name()), Some(id));
        }
        assert_eq!(AtomId::from_name("quad_form"), None);
    }

    #[test]
    fn matmul_shapes() {
        let m = Shape::matrix(3, 2);
        let v2 = Shape::vector(2);
        let v3 = Shape::vector(3);
        assert_eq!(Atom::MatMul.output_shape(&[&m, &v2]).unwrap(), v3);
        assert_eq!(Atom::MatMul.output_shape(&[&v3, &m]).unwrap(), v2);
        assert_eq!(Atom::MatMul.output_shape(&[&v2, &v2]).unwrap(), Shape::scalar());
        assert!(Atom::MatMul.output_shape(&[&m, &v3]).is_err());
    }

    #[test]
    fn transpose_action_permutes() {
        let s = Shape::matrix(2, 3);
        let out = Shape::matrix(3, 2);
        let l = &Atom::Transpose.linear_action(&[&s], &out)[0];
        // (1, 2) of the input lands at (2, 1) of the output.
        assert!(l.contains(&(2 + 3, 1 + 2 * 2, 1.0)));
    }

    #[test]
    fn stack_shapes() {
        let a = Shape::matrix(2, 3);
        let b = Shape::matrix(1, 3);
        assert_eq!(Atom::VStack.output_shape(&[&a, &b]).unwrap(), Shape::matrix(3, 3));
        assert!(Atom::HStack.output_shape(&[&a, &b]).is_err());
        let s = Shape::scalar();
        let v = Shape::vector(2);
        assert_eq!(Atom::HStack.output_shape(&[&s, &v]).unwrap(), Shape::vector(3));
    }
}
