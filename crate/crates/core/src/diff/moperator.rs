use nalgebra::DMatrix;

use crate::canon::ConeProgramData;
use crate::cone::{self, ConeBlock};

use super::lsqr::LinearOperator;
use super::skew::SkewData;

/// `M = (Q − I) DΠ(z) + I`, the derivative of the normalized residual map.
///
/// With `fix_w` the last column is dropped, i.e. perturbations keep `w` fixed.
/// `M z = 0` at every solution (the residual map is positively homogeneous), so
/// the square operator is always singular; the reduced one is not, generically.
pub struct MOperator<'a> {
    skew: SkewData<'a>,
    z: Vec<f64>,
    blocks: Vec<ConeBlock>,
    fix_w: bool,
}

impl<'a> MOperator<'a> {
    pub fn new(data: &'a ConeProgramData, z: &[f64], fix_w: bool) -> Self {
        let skew = SkewData::new(data);
        assert_eq!(z.len(), skew.dim(), "z has the wrong length");
        MOperator {
            skew,
            z: z.to_vec(),
            blocks: data.cones.dual_blocks(),
            fix_w,
        }
    }

    pub fn dim(&self) -> usize {
        self.skew.dim()
    }

    /// `DΠ(z) d`; the Jacobian is symmetric so this is also its adjoint.
    pub fn dpi(&self, d: &[f64]) -> Vec<f64> {
        let n = self.skew.n();
        let mut out = vec![0.0; d.len()];
        out[..n].copy_from_slice(&d[..n]);
        let mut off = n;
        for b in &self.blocks {
            let r = off..off + b.dim;
            cone::dproject_into(*b, &self.z[r.clone()], &d[r.clone()], &mut out[r]);
            off += b.dim;
        }
        out[off] = if self.z[off] > 0.0 { d[off] } else { 0.0 };
        out
    }

    fn extend(&self, x: &[f64]) -> Vec<f64> {
        let mut e = x.to_vec();
        if self.fix_w {
            e.push(0.0);
        }
        e
    }

    /// Materializes `(Q − I) DΠ(z) + I` column by column.
    pub fn dense(&self) -> DMatrix<f64> {
        let q = self.skew.to_dense();
        let n = self.dim();
        let cols = self.ncols();
        let mut out = DMatrix::zeros(n, cols);
        let mut e = vec![0.0; n];
        for j in 0..cols {
            e[j] = 1.0;
            let d = self.dpi(&e);
            e[j] = 0.0;
            let mut col = &q * nalgebra::DVector::from_column_slice(&d);
            for i in 0..n {
                col[i] -= d[i];
            }
            col[j] += 1.0;
            out.column_mut(j).copy_from(&col);
        }
        out
    }
}

impl LinearOperator for MOperator<'_> {
    fn nrows(&self) -> usize {
        self.dim()
    }

    fn ncols(&self) -> usize {
        if self.fix_w {
            self.dim() - 1
        } else {
            self.dim()
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let x = self.extend(x);
        let d = self.dpi(&x);
        let qd = self.skew.mul(&d);
        qd.iter().zip(&d).zip(&x).map(|((q, d), x)| q - d + x).collect()
    }

    fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        // Mᵀ y = DΠ (Qᵀ − I) y + y with Qᵀ = −Q.
        let qy = self.skew.mul(y);
        let t: Vec<f64> = qy.iter().zip(y).map(|(q, y)| -q - y).collect();
        let mut out: Vec<f64> = self.dpi(&t).iter().zip(y).map(|(a, b)| a + b).collect();
        if self.fix_w {
            out.pop();
        }
        out
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.dense()
    }
}
