//! Sparse order-3 tensors indexed `(row, column, slice)`.
//!
//! In the canonicalizer the column axis runs over the cone-program variables plus
//! a trailing constant column, and the slice axis over the parameters plus a
//! trailing constant slice.

#[derive(Clone, Debug, PartialEq)]
pub struct SparseTensor3 {
    dims: (usize, usize, usize),
    /// `(i, j, k, value)` sorted by `(k, j, i)`, unique, nonzero.
    entries: Vec<(usize, usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TensorError {
    #[error("tensor dimensions differ: {0:?} vs {1:?}")]
    Dims((usize, usize, usize), (usize, usize, usize)),
    #[error("both operands depend on parameters")]
    BothParametrized,
}

impl SparseTensor3 {
    /// Sorts entries, sums duplicates (in input order) and drops zeros.
    pub fn new(dims: (usize, usize, usize), mut entries: Vec<(usize, usize, usize, f64)>) -> Self {
        for &(i, j, k, v) in &entries {
            assert!(
                i < dims.0 && j < dims.1 && k < dims.2,
                "entry ({i}, {j}, {k}) out of bounds {dims:?}"
            );
            assert!(v.is_finite(), "non-finite tensor entry");
        }
        entries.sort_by_key(|e| (e.2, e.1, e.0));
        let mut merged: Vec<(usize, usize, usize, f64)> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if (last.0, last.1, last.2) == (e.0, e.1, e.2) => last.3 += e.3,
                _ => merged.push(e),
            }
        }
        merged.retain(|e| e.3 != 0.0);
        SparseTensor3 { dims, entries: merged }
    }

    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        SparseTensor3 {
            dims,
            entries: Vec::new(),
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn entries(&self) -> &[(usize, usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn const_slice(&self) -> usize {
        self.dims.2 - 1
    }

    /// True when every entry lies in the last (constant) slice.
    pub fn is_constant_slice_only(&self) -> bool {
        let c = self.const_slice();
        self.entries.iter().all(|e| e.2 == c)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(k, j, i), |e| (e.2, e.1, e.0))
            .map_or(0.0, |p| self.entries[p].3)
    }

    /// Sum of two same-shaped tensors.
    pub fn add(&self, other: &SparseTensor3) -> Result<SparseTensor3, TensorError> {
        if self.dims != other.dims {
            return Err(TensorError::Dims(self.dims, other.dims));
        }
        let mut e = self.entries.clone();
        e.extend_from_slice(&other.entries);
        Ok(SparseTensor3::new(self.dims, e))
    }

    /// Contracts the slice axis against `theta_tilde`, giving a dense
    /// `rows × cols` matrix in column-major order.
    pub fn contract(&self, theta_tilde: &[f64]) -> Vec<f64> {
        assert_eq!(theta_tilde.len(), self.dims.2);
        let mut out = vec![0.0; self.dims.0 * self.dims.1];
        for &(i, j, k, v) in &self.entries {
            out[i + j * self.dims.0] += v * theta_tilde[k];
        }
        out
    }

    /// Entries grouped by row: `rows[i]` lists `(j, k, v)`.
    fn by_row(&self) -> Vec<Vec<(usize, usize, f64)>> {
        let mut rows = vec![Vec::new(); self.dims.0];
        for &(i, j, k, v) in &self.entries {
            rows[i].push((j, k, v));
        }
        rows
    }
}

/// `psi(T, S)`: slicewise product where one operand lives in the constant slice.
///
/// With `T` of dims `(r, q, s)` and `S` of dims `(q, c, s)`, the result has dims
/// `(r, c, s)`. If `T` is constant-slice-only, slice `k` of the result is
/// `T[:, :, const] · S[:, :, k]`; otherwise `S` must be constant-slice-only and
/// slice `k` is `T[:, :, k] · S[:, :, const]`.
pub fn psi(t: &SparseTensor3, s: &SparseTensor3) -> Result<SparseTensor3, TensorError> {
    let (r, q, slices) = t.dims;
    if s.dims.0 != q || s.dims.2 != slices {
        return Err(TensorError::Dims(t.dims, s.dims));
    }
    let dims = (r, s.dims.1, slices);
    let c = slices - 1;
    let s_rows = s.by_row();
    let mut out = Vec::new();
    if t.is_constant_slice_only() {
        for &(i, mid, _, tv) in &t.entries {
            for &(j, k, sv) in &s_rows[mid] {
                out.push((i, j, k, tv * sv));
            }
        }
    } else if s.is_constant_slice_only() {
        for &(i, mid, k, tv) in &t.entries {
            for &(j, _, sv) in &s_rows[mid] {
                out.push((i, j, k, tv * sv));
            }
        }
    } else {
        return Err(TensorError::BothParametrized);
    }
    debug_assert!(out.iter().all(|e| e.2 <= c));
    Ok(SparseTensor3::new(dims, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(t: &SparseTensor3) -> Vec<Vec<Vec<f64>>> {
        let (r, c, s) = t.dims();
        let mut d = vec![vec![vec![0.0; s]; c]; r];
        for &(i, j, k, v) in t.entries() {
            d[i][j][k] = v;
        }
        d
    }

    #[test]
    fn duplicates_sum_and_zeros_drop() {
        let t = SparseTensor3::new(
            (2, 2, 2),
            vec![(0, 0, 1, 1.0), (0, 0, 1, -1.0), (1, 0, 0, 2.0), (1, 0, 0, 0.5)],
        );
        assert_eq!(t.entries(), &[(1, 0, 0, 2.5)]);
    }

    #[test]
    fn identity_is_neutral() {
        let id = SparseTensor3::new((2, 2, 3), vec![(0, 0, 2, 1.0), (1, 1, 2, 1.0)]);
        let s = SparseTensor3::new((2, 3, 3), vec![(0, 1, 0, 4.0), (1, 2, 1, -2.0), (1, 0, 2, 3.0)]);
        assert_eq!(psi(&id, &s).unwrap(), s);
        assert_eq!(psi(&id, &SparseTensor3::zeros((2, 3, 3))).unwrap().nnz(), 0);
    }

    #[test]
    fn matches_dense_contraction() {
        // T parametrized (slices 0, 1), S constant-only.
        let t = SparseTensor3::new((2, 2, 3), vec![(0, 0, 0, 1.0), (0, 1, 1, 2.0), (1, 1, 0, -1.0)]);
        let s = SparseTensor3::new((2, 2, 3), vec![(0, 0, 2, 3.0), (1, 0, 2, 5.0), (1, 1, 2, 7.0)]);
        let out = dense(&psi(&t, &s).unwrap());
        let (td, sd) = (dense(&t), dense(&s));
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..3 {
                    let want: f64 = (0..2).map(|m| td[i][m][k] * sd[m][j][2]).sum();
                    assert_eq!(out[i][j][k], want);
                }
            }
        }
    }

    #[test]
    fn both_parametrized_is_rejected() {
        let t = SparseTensor3::new((1, 1, 2), vec![(0, 0, 0, 1.0)]);
        assert_eq!(psi(&t, &t), Err(TensorError::BothParametrized));
    }
}
