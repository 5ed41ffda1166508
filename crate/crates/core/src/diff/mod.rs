//! Derivatives of the cone-program solution map by implicit differentiation of
//! the normalized residual map `N(z, Q) = (Q − I) Π(z) + z` at `w = 1`.
//!
//! `M = D_z N` annihilates `z` itself, so the systems are posed on `M′`, the
//! `N × (N − 1)` operator that keeps `w` fixed, and solved in the least-squares
//! sense. When `M′` has full column rank this is the exact derivative.

mod lsqr;
mod moperator;
mod pinv;
mod skew;

use serde::{Deserialize, Serialize};

use crate::canon::ConeProgramData;
use crate::solver::{normalized_point, ConeSolution, Status};
use crate::sparse::CscMatrix;

pub use lsqr::{lsqr, LinearOperator, LsqrResult, LsqrStop, Transposed};
pub use moperator::MOperator;
pub use pinv::PseudoInverse;
pub use skew::SkewData;

/// Problems with `N ≤ AUTO_DIRECT_MAX` use the dense direct solve under `Auto`.
pub const AUTO_DIRECT_MAX: usize = 512;
/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-9;
/// LSQR `atol` and `btol`.
pub const LSQR_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffMode {
    #[default]
    Auto,
    Direct,
    Iterative,
}

impl DiffMode {
    fn resolve(self, dim: usize) -> DiffMode {
        match self {
            DiffMode::Auto if dim <= AUTO_DIRECT_MAX => DiffMode::Direct,
            DiffMode::Auto => DiffMode::Iterative,
            m => m,
        }
    }
}

/// How a linear system was solved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffInfo {
    /// `Direct` or `Iterative`, never `Auto`.
    pub mode: DiffMode,
    /// Set when the answer is a least-squares solution rather than an exact one:
    /// the dense operator is rank deficient, or LSQR hit its iteration cap or
    /// stopped on an inconsistent system.
    pub fallback: bool,
    /// `‖M x − rhs‖`.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiffError {
    #[error("cannot differentiate a solution with status {0:?}")]
    NotOptimal(Status),
    #[error("{what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{0} contains non-finite values")]
    NonFinite(&'static str),
}

fn check_len(what: &'static str, v: &[f64], expected: usize) -> Result<(), DiffError> {
    if v.len() != expected {
        return Err(DiffError::Dimension {
            what,
            expected,
            got: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(DiffError::NonFinite(what));
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(op: &dyn LinearOperator, x: &[f64], rhs: &[f64]) -> f64 {
    let r: Vec<f64> = op.apply(x).iter().zip(rhs).map(|(a, b)| a - b).collect();
    norm(&r)
}

fn lsqr_fallback(r: &LsqrResult, rhs: &[f64]) -> bool {
    match r.stop {
        LsqrStop::ZeroRhs | LsqrStop::Compatible => false,
        LsqrStop::IterationLimit => true,
        LsqrStop::LeastSquares => r.residual > 1e-6 * norm(rhs),
    }
}

/// Least-squares solution of `op · x = rhs`.
pub fn solve_m_system(op: &dyn LinearOperator, rhs: &[f64], mode: DiffMode) -> (Vec<f64>, DiffInfo) {
    match mode.resolve(op.nrows().max(op.ncols())) {
        DiffMode::Direct => {
            let p = PseudoInverse::new(op.to_dense(), RANK_TOL);
            let x = p.solve(rhs);
            let info = DiffInfo {
                mode: DiffMode::Direct,
                fallback: p.rank() < p.full_rank(),
                residual: residual(op, &x, rhs),
                iterations: 0,
            };
            (x, info)
        }
        _ => {
            let r = lsqr(op, rhs, LSQR_TOL, LSQR_TOL, 10 * op.nrows().max(op.ncols()));
            let info = DiffInfo {
                mode: DiffMode::Iterative,
                fallback: lsqr_fallback(&r, rhs),
                residual: r.residual,
                iterations: r.iterations,
            };
            (r.x, info)
        }
    }
}

/// Tangent of the solution.
#[derive(Clone, Debug, PartialEq)]
pub struct Tangent {
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub ds: Vec<f64>,
    pub info: DiffInfo,
}

/// Cotangent of the problem data. `da` has exactly the pattern of `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cotangent {
    pub da: CscMatrix,
    pub db: Vec<f64>,
    pub dc: Vec<f64>,
    pub info: DiffInfo,
}

/// Derivative of the solution map at one solved problem. The dense
/// factorization is computed once and shared by every forward and adjoint call.
pub struct Derivative {
    data: ConeProgramData,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    mode: DiffMode,
    pinv: Option<PseudoInverse>,
}

impl std::fmt::Debug for Derivative {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Derivative")
            .field("dim", &self.z.len())
            .field("mode", &self.mode)
            .field("rank", &self.pinv.as_ref().map(PseudoInverse::rank))
            .finish()
    }
}

impl Derivative {
    pub fn new(data: &ConeProgramData, sol: &ConeSolution, mode: DiffMode) -> Result<Self, DiffError> {
        let z = normalized_point(sol).map_err(|_| DiffError::NotOptimal(sol.status))?;
        let (n, m) = (data.num_vars(), data.num_rows());
        check_len("x", &sol.x, n)?;
        check_len("y", &sol.y, m)?;
        check_len("s", &sol.s, m)?;
        let mode = mode.resolve(n + m + 1);
        let pinv = match mode {
            DiffMode::Direct => Some(PseudoInverse::new(MOperator::new(data, &z, true).dense(), RANK_TOL)),
            _ => None,
        };
        Ok(Derivative {
            data: data.clone(),
            x: sol.x.clone(),
            y: sol.y.clone(),
            z,
            mode,
            pinv,
        })
    }

    pub fn mode(&self) -> DiffMode {
        self.mode
    }

    fn operator(&self) -> MOperator<'_> {
        MOperator::new(&self.data, &self.z, true)
    }

    fn direct_info(&self, p: &PseudoInverse, residual: f64) -> DiffInfo {
        DiffInfo {
            mode: DiffMode::Direct,
            fallback: p.rank() < p.full_rank(),
            residual,
            iterations: 0,
        }
    }

    /// JVP: solution tangent for a data perturbation `(dA, db, dc)`.
    pub fn forward(&self, da: &CscMatrix, db: &[f64], dc: &[f64]) -> Result<Tangent, DiffError> {
        let (n, m) = (self.data.num_vars(), self.data.num_rows());
        if da.nrows() != m || da.ncols() != n {
            return Err(DiffError::Dimension {
                what: "dA",
                expected: m * n,
                got: da.nrows() * da.ncols(),
            });
        }
        if !da.is_finite() {
            return Err(DiffError::NonFinite("dA"));
        }
        check_len("db", db, m)?;
        check_len("dc", dc, n)?;
        // dQ·Π(z) with Π(z) = (x, y, 1).
        let mut rhs = dc.to_vec();
        da.mul_t_vec_acc(&self.y, 1.0, &mut rhs);
        let mut mid = db.to_vec();
        da.mul_vec_acc(&self.x, -1.0, &mut mid);
        rhs.extend(mid);
        rhs.push(-crate::solver::dot(dc, &self.x) - crate::solver::dot(db, &self.y));

        let op = self.operator();
        let (d, info) = match &self.pinv {
            Some(p) => {
                let d = p.solve(&rhs);
                let r = residual(&op, &d, &rhs);
                (d, self.direct_info(p, r))
            }
            None => solve_m_system(&op, &rhs, DiffMode::Iterative),
        };
        let mut dz: Vec<f64> = d.iter().map(|v| -v).collect();
        dz.push(0.0);
        let dpi = op.dpi(&dz);
        let dx = dz[..n].to_vec();
        let dy = dpi[n..n + m].to_vec();
        let ds = dy.iter().zip(&dz[n..n + m]).map(|(a, b)| a - b).collect();
        Ok(Tangent { dx, dy, ds, info })
    }

    /// VJP: data cotangent for a cotangent `dx` on the primal solution.
    pub fn adjoint(&self, dx: &[f64]) -> Result<Cotangent, DiffError> {
        let (n, m) = (self.data.num_vars(), self.data.num_rows());
        check_len("dx", dx, n)?;
        let mut rhs = dx.to_vec();
        rhs.resize(n + m, 0.0);
        let op = self.operator();
        let op_t = Transposed(&op);
        let (g, info) = match &self.pinv {
            Some(p) => {
                let g = p.solve_t(&rhs);
                let r = residual(&op_t, &g, &rhs);
                (g, self.direct_info(p, r))
            }
            None => solve_m_system(&op_t, &rhs, DiffMode::Iterative),
        };
        let gw = g[n + m];
        let values = self
            .data
            .a
            .iter()
            .map(|(i, j, _)| self.x[j] * g[n + i] - self.y[i] * g[j])
            .collect();
        let da = self.data.a.with_values(values);
        let db = (0..m).map(|i| self.y[i] * gw - g[n + i]).collect();
        let dc = (0..n).map(|j| self.x[j] * gw - g[j]).collect();
        Ok(Cotangent { da, db, dc, info })
    }
}

pub fn forward_derivative(
    data: &ConeProgramData,
    sol: &ConeSolution,
    da: &CscMatrix,
    db: &[f64],
    dc: &[f64],
    mode: DiffMode,
) -> Result<Tangent, DiffError> {
    Derivative::new(data, sol, mode)?.forward(da, db, dc)
}

pub fn adjoint_derivative(
    data: &ConeProgramData,
    sol: &ConeSolution,
    dx: &[f64],
    mode: DiffMode,
) -> Result<Cotangent, DiffError> {
    Derivative::new(data, sol, mode)?.adjoint(dx)
}

#[cfg(test)]
mod tests;
