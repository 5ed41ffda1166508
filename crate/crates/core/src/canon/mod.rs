//! Compilation of DPP problems to cone programs `min cᵀx s.t. b − Ax ∈ K`.
//!
//! Cone rows are ordered zero, nonneg, then second-order blocks in creation
//! order. Columns hold the user variables in declaration order followed by the
//! epigraph variables.

mod asa;
mod layout;
mod lower;
mod tensor;

pub use asa::{build_asa, canonicalize_fresh, compile_asa, expr_tensor, leaf_tensor, AsaForm, LeafIndex};
pub use layout::{Layout, LayoutEntry, LayoutError};
pub use lower::{lower, lower_unchecked, ConeConstraint, LoweredProblem};
pub use tensor::{psi, SparseTensor3, TensorError};

use crate::cone::ConeSpec;
use crate::expr::{DppReport, ExprError, ProblemError};
use crate::sparse::CscMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CanonError {
    #[error("problem is not DPP: {0}")]
    NotDpp(DppReport),
    #[error("leaf `{0}` is not declared")]
    UndeclaredLeaf(String),
    #[error("expected {expected} parameter values, got {found}")]
    ParameterLength { expected: usize, found: usize },
    #[error("parameter values must be finite")]
    NonFinite,
    #[error("data dimensions do not match the compiled problem")]
    DataShape,
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("internal canonicalization error: {0}")]
    Internal(String),
}

/// Data of one cone program.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeProgramData {
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub cones: ConeSpec,
}

impl ConeProgramData {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    /// Checks dimensions and finiteness.
    pub fn validate(&self) -> Result<(), CanonError> {
        let m = self.cones.rows();
        if self.a.nrows() != m || self.b.len() != m || self.a.ncols() != self.c.len() {
            return Err(CanonError::DataShape);
        }
        if !self.a.is_finite() || self.b.iter().chain(&self.c).any(|v| !v.is_finite()) {
            return Err(CanonError::NonFinite);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;

/// Medians over repeated runs of both canonicalization paths.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonTiming {
    /// One-time cost of building the cached map.
    pub compile_secs: f64,
    /// Substitute, lower and extract from scratch.
    pub fresh_secs: f64,
    /// Evaluate the cached map at `θ`.
    pub cached_secs: f64,
    pub reps: usize,
}

impl CanonTiming {
    pub fn speedup(&self) -> f64 {
        self.fresh_secs / self.cached_secs
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Times `canonicalize_fresh` against `materialize` of a compiled map, `reps ≥ 1`
/// times each.
pub fn time_canonicalization(
    problem: &crate::expr::Problem,
    values: &crate::array::Values,
    reps: usize,
) -> Result<CanonTiming, CanonError> {
    use std::time::Instant;
    let reps = reps.max(1);
    let t = Instant::now();
    let asa = compile_asa(problem)?;
    let compile_secs = t.elapsed().as_secs_f64();
    let theta = asa.flatten_params(values)?;
    let mut fresh = Vec::with_capacity(reps);
    let mut cached = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        std::hint::black_box(canonicalize_fresh(problem, values)?);
        fresh.push(t.elapsed().as_secs_f64());
        let t = Instant::now();
        std::hint::black_box(asa.materialize(&theta)?);
        cached.push(t.elapsed().as_secs_f64());
    }
    Ok(CanonTiming {
        compile_secs,
        fresh_secs: median(fresh),
        cached_secs: median(cached),
        reps,
    })
}
