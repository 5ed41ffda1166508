//! LSQR (Paige and Saunders) for `min ‖A x − b‖₂` with `A` given as an operator.

use nalgebra::DMatrix;

pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_t(&self, y: &[f64]) -> Vec<f64>;

    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.ncols();
        let mut out = DMatrix::zeros(self.nrows(), n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            out.column_mut(j).copy_from_slice(&self.apply(&e));
            e[j] = 0.0;
        }
        out
    }
}

impl LinearOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec()
    }

    fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        (self.tr_mul(&nalgebra::DVector::from_column_slice(y)))
            .as_slice()
            .to_vec()
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

/// The adjoint of another operator.
pub struct Transposed<'a, T: LinearOperator + ?Sized>(pub &'a T);

impl<T: LinearOperator + ?Sized> LinearOperator for Transposed<'_, T> {
    fn nrows(&self) -> usize {
        self.0.ncols()
    }

    fn ncols(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.0.apply_t(x)
    }

    fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        self.0.apply(y)
    }
}

/// Why LSQR stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LsqrStop {
    /// `x = 0` is exact (zero right-hand side).
    ZeroRhs,
    /// `A x = b` holds to the requested tolerance.
    Compatible,
    /// `x` is a least-squares solution; the system is inconsistent.
    LeastSquares,
    /// Iteration limit reached.
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct LsqrResult {
    pub x: Vec<f64>,
    pub stop: LsqrStop,
    pub iterations: usize,
    /// `‖b − A x‖`.
    pub residual: f64,
    /// `‖Aᵀ(b − A x)‖`.
    pub normal_residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn scale(v: &mut [f64], s: f64) {
    v.iter_mut().for_each(|x| *x *= s);
}

pub fn lsqr(op: &dyn LinearOperator, b: &[f64], atol: f64, btol: f64, iter_lim: usize) -> LsqrResult {
    let n = op.ncols();
    let mut x = vec![0.0; n];
    let mut u = b.to_vec();
    let bnorm = norm(&u);
    if bnorm == 0.0 {
        return LsqrResult {
            x,
            stop: LsqrStop::ZeroRhs,
            iterations: 0,
            residual: 0.0,
            normal_residual: 0.0,
        };
    }
    let mut beta = bnorm;
    scale(&mut u, 1.0 / beta);
    let mut v = op.apply_t(&u);
    let mut alpha = norm(&v);
    if alpha > 0.0 {
        scale(&mut v, 1.0 / alpha);
    }
    let mut w = v.clone();
    let mut phibar = beta;
    let mut rhobar = alpha;
    let mut anorm2 = 0.0;
    let mut rnorm = beta;
    let mut arnorm = alpha * beta;
    if arnorm == 0.0 {
        return LsqrResult {
            x,
            stop: LsqrStop::LeastSquares,
            iterations: 0,
            residual: rnorm,
            normal_residual: 0.0,
        };
    }
    let mut stop = LsqrStop::IterationLimit;
    let mut itn = 0;
    while itn < iter_lim {
        itn += 1;
        // Bidiagonalization step.
        let av = op.apply(&v);
        u.iter_mut().zip(&av).for_each(|(ui, a)| *ui = a - alpha * *ui);
        beta = norm(&u);
        if beta > 0.0 {
            scale(&mut u, 1.0 / beta);
            anorm2 += alpha * alpha + beta * beta;
            let atu = op.apply_t(&u);
            v.iter_mut().zip(&atu).for_each(|(vi, a)| *vi = a - beta * *vi);
            alpha = norm(&v);
            if alpha > 0.0 {
                scale(&mut v, 1.0 / alpha);
            }
        } else {
            anorm2 += alpha * alpha;
        }
        // Plane rotation.
        let rho = rhobar.hypot(beta);
        let cs = rhobar / rho;
        let sn = beta / rho;
        let theta = sn * alpha;
        rhobar = -cs * alpha;
        let phi = cs * phibar;
        phibar *= sn;
        let t1 = phi / rho;
        let t2 = -theta / rho;
        for i in 0..n {
            x[i] += t1 * w[i];
            w[i] = v[i] + t2 * w[i];
        }
        rnorm = phibar;
        arnorm = alpha * (sn * phibar).abs();
        let anorm = anorm2.sqrt();
        let xnorm = norm(&x);
        if rnorm <= btol * bnorm + atol * anorm * xnorm {
            stop = LsqrStop::Compatible;
            break;
        }
        if anorm * rnorm == 0.0 || arnorm / (anorm * rnorm) <= atol {
            stop = LsqrStop::LeastSquares;
            break;
        }
    }
    LsqrResult {
        x,
        stop,
        iterations: itn,
        residual: rnorm,
        normal_residual: arnorm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_square_system() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let b = [1.0, 2.0, 3.0];
        let r = lsqr(&a, &b, 1e-12, 1e-12, 100);
        assert_eq!(r.stop, LsqrStop::Compatible);
        let ax = a.apply(&r.x);
        for (p, q) in ax.iter().zip(&b) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn least_squares_on_inconsistent_system() {
        // Fit a constant to (1, 2, 3): the answer is the mean.
        let a = DMatrix::from_element(3, 1, 1.0);
        let r = lsqr(&a, &[1.0, 2.0, 3.0], 1e-12, 1e-12, 100);
        assert_eq!(r.stop, LsqrStop::LeastSquares);
        assert!((r.x[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs() {
        let a = DMatrix::identity(2, 2);
        let r = lsqr(&a, &[0.0, 0.0], 1e-12, 1e-12, 10);
        assert_eq!(r.stop, LsqrStop::ZeroRhs);
        assert_eq!(r.x, vec![0.0, 0.0]);
    }
}
