//! Operator-splitting solver for `min cᵀx s.t. b − Ax ∈ K` on the homogeneous
//! self-dual embedding, with an optional Newton refinement of the final point.

mod admm;
mod polish;

use serde::{Deserialize, Serialize};

use crate::canon::ConeProgramData;
use crate::cone::{self, ConeSpec};

pub use polish::{polish, Polished};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub max_iters: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Tolerance on infeasibility and unboundedness certificates.
    pub eps_infeas: f64,
    /// Over-relaxation factor in (0, 2).
    pub alpha: f64,
    /// Ruiz equilibration of `A` and unit-norm scaling of `b` and `c`.
    pub scale: bool,
    /// Newton refinement on the residual map for small problems.
    pub polish: bool,
    /// Largest embedding dimension `n + m + 1` for which refinement runs.
    pub polish_max_dim: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_iters: 100_000,
            eps_abs: 1e-8,
            eps_rel: 1e-8,
            eps_infeas: 1e-7,
            alpha: 1.5,
            scale: true,
            polish: true,
            polish_max_dim: 400,
        }
    }
}

impl SolverSettings {
    /// Same settings with `eps_abs = eps_rel = eps`.
    pub fn with_tolerance(mut self, eps: f64) -> Self {
        self.eps_abs = eps;
        self.eps_rel = eps;
        self
    }

    fn validate(&self) -> Result<(), SolverError> {
        let ok = self.max_iters > 0
            && self.eps_abs > 0.0
            && self.eps_rel > 0.0
            && self.eps_infeas > 0.0
            && self.alpha > 0.0
            && self.alpha < 2.0;
        if ok {
            Ok(())
        } else {
            Err(SolverError::Settings)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIters,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveInfo {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub polish_steps: usize,
    pub solve_time_secs: f64,
}

/// Primal-dual point. For `Infeasible` the dual `y` is a certificate with
/// `bᵀy = −1`; for `Unbounded` the primal `x` is one with `cᵀx = −1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub status: Status,
    pub info: SolveInfo,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("invalid problem data: {0}")]
    InvalidData(String),
    #[error("invalid solver settings")]
    Settings,
    #[error("solution status is {0:?}, not optimal")]
    NotOptimal(Status),
    #[error("warm start has the wrong dimensions")]
    WarmStart,
}

/// A previous solution used to initialize the iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct WarmStart {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
}

pub fn solve(data: &ConeProgramData, settings: &SolverSettings) -> Result<ConeSolution, SolverError> {
    solve_warm(data, settings, None)
}

pub fn solve_warm(
    data: &ConeProgramData,
    settings: &SolverSettings,
    warm: Option<&WarmStart>,
) -> Result<ConeSolution, SolverError> {
    settings.validate()?;
    data.validate().map_err(|e| SolverError::InvalidData(e.to_string()))?;
    if let Some(w) = warm {
        if w.x.len() != data.num_vars() || w.y.len() != data.num_rows() || w.s.len() != data.num_rows() {
            return Err(SolverError::WarmStart);
        }
    }
    let start = std::time::Instant::now();
    let mut sol = admm::run(data, settings, warm);
    sol.info.solve_time_secs = start.elapsed().as_secs_f64();
    Ok(sol)
}

/// KKT residual norms of a candidate point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residuals {
    /// `‖Ax + s − b‖`
    pub primal: f64,
    /// `‖Aᵀy + c‖`
    pub dual: f64,
    /// `|cᵀx + bᵀy|`
    pub gap: f64,
}

pub fn residuals(data: &ConeProgramData, x: &[f64], y: &[f64], s: &[f64]) -> Residuals {
    let mut rp = data.a.mul_vec(x);
    rp.iter_mut().zip(s).zip(&data.b).for_each(|((r, s), b)| *r += s - b);
    let mut rd = data.a.mul_t_vec(y);
    rd.iter_mut().zip(&data.c).for_each(|(r, c)| *r += c);
    Residuals {
        primal: cone::norm(&rp),
        dual: cone::norm(&rd),
        gap: (dot(&data.c, x) + dot(&data.b, y)).abs(),
    }
}

/// True when the residuals meet the stopping rule and `(s, y) ∈ K × K*`.
pub fn is_converged(data: &ConeProgramData, x: &[f64], y: &[f64], s: &[f64], settings: &SolverSettings) -> bool {
    let r = residuals(data, x, y, s);
    let (cx, by) = (dot(&data.c, x), dot(&data.b, y));
    let tol = |scale: f64| settings.eps_abs + settings.eps_rel * scale;
    r.primal <= tol(cone::norm(&data.b))
        && r.dual <= tol(cone::norm(&data.c))
        && r.gap <= tol(cx.abs().max(by.abs()))
        && cone::cone_violation(s, &data.cones, false) <= tol(cone::norm(s))
        && cone::cone_violation(y, &data.cones, true) <= tol(cone::norm(y))
}

/// Largest of the primal, dual and gap residuals, each scaled by its data size.
pub fn relative_residual(data: &ConeProgramData, x: &[f64], y: &[f64], s: &[f64]) -> f64 {
    let r = residuals(data, x, y, s);
    let (cx, by) = (dot(&data.c, x), dot(&data.b, y));
    (r.primal / (1.0 + cone::norm(&data.b)))
        .max(r.dual / (1.0 + cone::norm(&data.c)))
        .max(r.gap / (1.0 + cx.abs() + by.abs()))
}

/// `z = (x, y − s, 1)`.
pub fn normalized_point(sol: &ConeSolution) -> Result<Vec<f64>, SolverError> {
    if sol.status != Status::Optimal {
        return Err(SolverError::NotOptimal(sol.status));
    }
    let mut z = sol.x.clone();
    z.extend(sol.y.iter().zip(&sol.s).map(|(y, s)| y - s));
    z.push(1.0);
    Ok(z)
}

/// `(x, y, s) = (u, Π_{K*}(v), Π_{K*}(v) − v) / w` for `z = (u, v, w)`.
pub fn reconstruct(z: &[f64], cones: &ConeSpec, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = cones.rows();
    let w = z[n + m];
    let v = &z[n..n + m];
    let mut py = vec![0.0; m];
    cone::project_cone(v, cones, true, &mut py);
    let x = z[..n].iter().map(|u| u / w).collect();
    let s = py.iter().zip(v).map(|(p, v)| (p - v) / w).collect();
    let y = py.iter().map(|p| p / w).collect();
    (x, y, s)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
