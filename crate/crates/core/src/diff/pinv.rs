use nalgebra::{DMatrix, DVector};

/// Truncated-SVD pseudo-inverse, usable for a matrix and its transpose.
pub struct PseudoInverse {
    u: DMatrix<f64>,
    v_t: DMatrix<f64>,
    inv_sigma: Vec<f64>,
    rank: usize,
}

impl PseudoInverse {
    /// Singular values below `rel_tol · σ_max` are treated as zero.
    pub fn new(m: DMatrix<f64>, rel_tol: f64) -> Self {
        let svd = m.svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let cut = rel_tol * smax;
        let inv_sigma: Vec<f64> = svd
            .singular_values
            .iter()
            .map(|&s| if s > cut && s > 0.0 { 1.0 / s } else { 0.0 })
            .collect();
        let rank = inv_sigma.iter().filter(|s| **s != 0.0).count();
        PseudoInverse {
            u: svd.u.expect("requested U"),
            v_t: svd.v_t.expect("requested Vᵀ"),
            inv_sigma,
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Number of singular values, `min(rows, cols)`.
    pub fn full_rank(&self) -> usize {
        self.inv_sigma.len()
    }

    /// `M⁺ b`, the minimum-norm least-squares solution of `M x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut t = self.u.tr_mul(&DVector::from_column_slice(b));
        t.iter_mut().zip(&self.inv_sigma).for_each(|(x, s)| *x *= s);
        (self.v_t.tr_mul(&t)).as_slice().to_vec()
    }

    /// `(Mᵀ)⁺ b`.
    pub fn solve_t(&self, b: &[f64]) -> Vec<f64> {
        let mut t = &self.v_t * DVector::from_column_slice(b);
        t.iter_mut().zip(&self.inv_sigma).for_each(|(x, s)| *x *= s);
        (&self.u * t).as_slice().to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_nonsingular_and_transpose() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let p = PseudoInverse::new(m.clone(), 1e-12);
        assert_eq!(p.rank(), 2);
        let x = p.solve(&[3.0, 3.0]);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        let y = p.solve_t(&[2.0, 4.0]);
        let back = m.transpose() * DVector::from_column_slice(&y);
        assert!((back[0] - 2.0).abs() < 1e-14 && (back[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn rank_deficient_gives_min_norm() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let p = PseudoInverse::new(m, 1e-12);
        assert_eq!(p.rank(), 1);
        let x = p.solve(&[2.0, 2.0]);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
