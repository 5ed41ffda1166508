use std::fmt;

use serde::{Deserialize, Serialize};

/// Dimensions of a scalar, vector or matrix. Matrices are flattened column-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape {
    dims: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("shapes of rank {0} are not supported (rank must be at most 2)")]
pub struct RankError(pub usize);

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self, RankError> {
        if dims.len() > 2 {
            return Err(RankError(dims.len()));
        }
        Ok(Shape { dims })
    }

    pub fn scalar() -> Self {
        Shape { dims: Vec::new() }
    }

    pub fn vector(n: usize) -> Self {
        Shape { dims: vec![n] }
    }

    pub fn matrix(rows: usize, cols: usize) -> Self {
        Shape { dims: vec![rows, cols] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_scalar(&self) -> bool {
        self.dims.is_empty()
    }

    /// Number of rows when viewed as a matrix (vectors are columns).
    pub fn rows(&self) -> usize {
        match self.dims.as_slice() {
            [] => 1,
            [n] => *n,
            [r, _] => *r,
            _ => unreachable!(),
        }
    }

    pub fn cols(&self) -> usize {
        match self.dims.as_slice() {
            [_, c] => *c,
            _ => 1,
        }
    }

    pub fn transposed(&self) -> Shape {
        match self.dims.as_slice() {
            [r, c] => Shape::matrix(*c, *r),
            _ => self.clone(),
        }
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = RankError;

    fn try_from(dims: Vec<usize>) -> Result<Self, Self::Error> {
        Shape::new(dims)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(shape: Shape) -> Self {
        shape.dims
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dims.as_slice() {
            [] => write!(f, "()"),
            [n] => write!(f, "({n},)"),
            [r, c] => write!(f, "({r}, {c})"),
            _ => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_views() {
        assert_eq!(Shape::scalar().size(), 1);
        assert_eq!(Shape::vector(0).size(), 0);
        let m = Shape::matrix(2, 3);
        assert_eq!((m.rows(), m.cols(), m.size()), (2, 3, 6));
        assert_eq!(m.transposed(), Shape::matrix(3, 2));
        assert_eq!(Shape::vector(4).rows(), 4);
        assert!(Shape::new(vec![1, 2, 3]).is_err());
    }
}
