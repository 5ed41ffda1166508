use nalgebra::DMatrix;

use crate::canon::ConeProgramData;

/// Implicit form of the skew-symmetric embedding matrix
///
/// ```text
///     [  0   Aᵀ   c ]
/// Q = [ -A   0    b ]
///     [ -cᵀ  -bᵀ  0 ]
/// ```
#[derive(Clone, Debug)]
pub struct SkewData<'a> {
    data: &'a ConeProgramData,
}

impl<'a> SkewData<'a> {
    pub fn new(data: &'a ConeProgramData) -> Self {
        SkewData { data }
    }

    pub fn n(&self) -> usize {
        self.data.c.len()
    }

    pub fn m(&self) -> usize {
        self.data.b.len()
    }

    pub fn dim(&self) -> usize {
        self.n() + self.m() + 1
    }

    /// `Q u`.
    pub fn mul(&self, u: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n(), self.m());
        assert_eq!(u.len(), n + m + 1);
        let (ux, uy, uw) = (&u[..n], &u[n..n + m], u[n + m]);
        let d = self.data;
        let mut out = vec![0.0; n + m + 1];
        d.a.mul_t_vec_acc(uy, 1.0, &mut out[..n]);
        out[..n].iter_mut().zip(&d.c).for_each(|(o, c)| *o += c * uw);
        d.a.mul_vec_acc(ux, -1.0, &mut out[n..n + m]);
        out[n..n + m].iter_mut().zip(&d.b).for_each(|(o, b)| *o += b * uw);
        out[n + m] = -dot(&d.c, ux) - dot(&d.b, uy);
        out
    }

    /// `Qᵀ u = −Q u`.
    pub fn mul_t(&self, u: &[f64]) -> Vec<f64> {
        let mut v = self.mul(u);
        v.iter_mut().for_each(|x| *x = -*x);
        v
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.m());
        let mut q = DMatrix::zeros(n + m + 1, n + m + 1);
        for (i, j, v) in self.data.a.iter() {
            q[(j, n + i)] = v;
            q[(n + i, j)] = -v;
        }
        for (j, c) in self.data.c.iter().enumerate() {
            q[(j, n + m)] = *c;
            q[(n + m, j)] = -c;
        }
        for (i, b) in self.data.b.iter().enumerate() {
            q[(n + i, n + m)] = *b;
            q[(n + m, n + i)] = -b;
        }
        q
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
