use std::collections::BTreeMap;

use crate::shape::Shape;

/// Dense array of rank at most two, stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    shape: Shape,
    data: Vec<f64>,
}

/// Named arrays, e.g. parameter assignments or variable values.
pub type Values = BTreeMap<String, Array>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("array data of length {len} does not fit shape {shape}")]
pub struct ArrayShapeError {
    pub shape: Shape,
    pub len: usize,
}

impl Array {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self, ArrayShapeError> {
        if shape.size() != data.len() {
            return Err(ArrayShapeError { len: data.len(), shape });
        }
        Ok(Array { shape, data })
    }

    pub fn scalar(value: f64) -> Self {
        Array {
            shape: Shape::scalar(),
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Array {
            shape: Shape::vector(data.len()),
            data,
        }
    }

    pub fn zeros(shape: Shape) -> Self {
        let data = vec![0.0; shape.size()];
        Array { shape, data }
    }

    /// Builds a matrix from a list of rows. Ragged input is rejected.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ArrayShapeError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let shape = Shape::matrix(r, c);
        if rows.iter().any(|row| row.len() != c) {
            return Err(ArrayShapeError {
                shape,
                len: rows.iter().map(Vec::len).sum(),
            });
        }
        let mut data = vec![0.0; r * c];
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                data[i + j * r] = *v;
            }
        }
        Ok(Array { shape, data })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.shape.rows()]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let (r, c) = (self.shape.rows(), self.shape.cols());
        (0..r).map(|i| (0..c).map(|j| self.data[i + j * r]).collect()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Array) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
