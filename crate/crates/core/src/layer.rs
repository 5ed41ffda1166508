//! The differentiable solution map: compile once, then forward and backward
//! through canonicalization, the cone solver and retrieval.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::array::Values;
use crate::canon::{compile_asa, AsaForm, CanonError, ConeProgramData, LayoutError};
use crate::diff::{Derivative, DiffError, DiffInfo, DiffMode};
use crate::expr::{Declaration, DppReport, Problem};
use crate::solver::{self, ConeSolution, SolveInfo, SolverError, SolverSettings, Status};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LayerError {
    #[error("problem is not DPP:\n{0}")]
    NotDpp(DppReport),
    #[error(transparent)]
    Canon(CanonError),
    #[error("parameter `{0}` is declared nonnegative but has a negative entry")]
    NegativeParameter(String),
    #[error("parameter `{0}` is declared nonpositive but has a positive entry")]
    PositiveParameter(String),
    #[error(transparent)]
    Binding(#[from] LayoutError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("forward pass ended with status {0:?}; there is nothing to differentiate")]
    NotOptimal(Status),
    #[error("tape was produced by a different layer")]
    ForeignTape,
    #[error(transparent)]
    Diff(#[from] DiffError),
}

impl From<CanonError> for LayerError {
    fn from(e: CanonError) -> Self {
        match e {
            CanonError::NotDpp(report) => LayerError::NotDpp(report),
            CanonError::Layout(l) => LayerError::Binding(l),
            other => LayerError::Canon(other),
        }
    }
}

/// How batch calls distribute elements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// A rayon pool when the `parallel` feature is on, sequential otherwise.
    #[default]
    Parallel,
}

/// Compiled solution map from named parameters to named primal variables.
#[derive(Debug)]
pub struct Layer {
    id: u64,
    asa: AsaForm,
    settings: SolverSettings,
    diff_mode: DiffMode,
    parameters: Vec<Declaration>,
    variables: Vec<Declaration>,
}

/// State kept from a forward pass for the matching backward pass.
#[derive(Debug)]
pub struct Tape {
    layer_id: u64,
    data: ConeProgramData,
    solution: ConeSolution,
    derivative: OnceLock<Derivative>,
}

impl Tape {
    pub fn data(&self) -> &ConeProgramData {
        &self.data
    }

    pub fn solution(&self) -> &ConeSolution {
        &self.solution
    }
}

#[derive(Debug)]
pub struct ForwardResult {
    pub status: Status,
    /// Primal variable values; `None` unless the solve was optimal.
    pub outputs: Option<Values>,
    /// Objective of the source problem at the solution.
    pub objective: Option<f64>,
    pub info: SolveInfo,
    pub tape: Tape,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub grads: Values,
    pub info: DiffInfo,
}

impl Layer {
    /// Checks DPP and builds the cached parameter-to-data map.
    pub fn compile(problem: &Problem, settings: SolverSettings) -> Result<Layer, LayerError> {
        let asa = compile_asa(problem)?;
        Ok(Layer {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            asa,
            settings,
            diff_mode: DiffMode::Auto,
            parameters: problem.parameters().to_vec(),
            variables: problem.variables().to_vec(),
        })
    }

    pub fn with_diff_mode(mut self, mode: DiffMode) -> Self {
        self.diff_mode = mode;
        self
    }

    pub fn asa(&self) -> &AsaForm {
        &self.asa
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    /// Binding signature, in declaration order.
    pub fn parameters(&self) -> &[Declaration] {
        &self.parameters
    }

    pub fn variables(&self) -> &[Declaration] {
        &self.variables
    }

    /// Flattened parameter vector after shape and sign checks.
    pub fn bind(&self, values: &Values) -> Result<Vec<f64>, LayerError> {
        let theta = self.asa.flatten_params(values)?;
        for d in &self.parameters {
            let data = values[&d.name].data();
            if d.attrs.nonneg && data.iter().any(|v| *v < 0.0) {
                return Err(LayerError::NegativeParameter(d.name.clone()));
            }
            if d.attrs.nonpos && data.iter().any(|v| *v > 0.0) {
                return Err(LayerError::PositiveParameter(d.name.clone()));
            }
        }
        Ok(theta)
    }

    pub fn forward(&self, values: &Values) -> Result<ForwardResult, LayerError> {
        let theta = self.bind(values)?;
        let data = self.asa.materialize(&theta)?;
        let solution = solver::solve(&data, &self.settings)?;
        let (outputs, objective) = if solution.status == Status::Optimal {
            (
                Some(self.asa.retrieve(&solution.x)?),
                Some(self.asa.objective_value(&theta, &data.c, &solution.x)?),
            )
        } else {
            (None, None)
        };
        Ok(ForwardResult {
            status: solution.status,
            outputs,
            objective,
            info: solution.info.clone(),
            tape: Tape {
                layer_id: self.id,
                data,
                solution,
                derivative: OnceLock::new(),
            },
        })
    }

    /// Parameter gradients for cotangents on the outputs. Outputs missing from
    /// `cotangents` count as zero.
    pub fn backward(&self, tape: &Tape, cotangents: &Values) -> Result<Gradients, LayerError> {
        if tape.layer_id != self.id {
            return Err(LayerError::ForeignTape);
        }
        if tape.solution.status != Status::Optimal {
            return Err(LayerError::NotOptimal(tape.solution.status));
        }
        let dx = self.asa.retrieve_adjoint(cotangents)?;
        let derivative = match tape.derivative.get() {
            Some(d) => d,
            None => {
                let d = Derivative::new(&tape.data, &tape.solution, self.diff_mode)?;
                tape.derivative.get_or_init(|| d)
            }
        };
        let cot = derivative.adjoint(&dx)?;
        let dtheta = self.asa.materialize_adjoint(&cot.da, &cot.db, &cot.dc)?;
        Ok(Gradients {
            grads: self.asa.unflatten_params(&dtheta)?,
            info: cot.info,
        })
    }

    /// One result per element; a failing element does not stop the others.
    pub fn forward_batch(&self, batch: &[Values], exec: Execution) -> Vec<Result<ForwardResult, LayerError>> {
        map_batch(batch, exec, |v| self.forward(v))
    }

    pub fn backward_batch(&self, batch: &[(&Tape, &Values)], exec: Execution) -> Vec<Result<Gradients, LayerError>> {
        map_batch(batch, exec, |(t, c)| self.backward(t, c))
    }
}

/// Entries with magnitude below this are compared in absolute terms.
pub const GRADCHECK_FLOOR: f64 = 1e-3;

/// Backward pass against central differences of the forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    /// Largest `|g − fd| / max(|g|, |fd|, GRADCHECK_FLOOR)` over all entries.
    pub max_rel_error: f64,
    /// Parameter and flat (column-major) index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub analytic: Values,
    pub numeric: Values,
}

/// Compares `backward(cotangents)` with central differences of
/// `θ ↦ Σ ⟨cotangent, output⟩` using step `h` on every parameter entry.
pub fn gradcheck(layer: &Layer, params: &Values, cotangents: &Values, h: f64) -> Result<GradCheck, LayerError> {
    let base = layer.forward(params)?;
    if base.status != Status::Optimal {
        return Err(LayerError::NotOptimal(base.status));
    }
    let analytic = layer.backward(&base.tape, cotangents)?.grads;
    let loss = |vals: &Values| -> Result<f64, LayerError> {
        let r = layer.forward(vals)?;
        let out = r.outputs.ok_or(LayerError::NotOptimal(r.status))?;
        Ok(cotangents
            .iter()
            .map(|(k, c)| {
                out.get(k)
                    .map_or(0.0, |o| o.data().iter().zip(c.data()).map(|(a, b)| a * b).sum())
            })
            .sum())
    };
    let mut numeric = Values::new();
    let mut max_rel_error = 0.0;
    let mut worst = None;
    for d in &layer.parameters {
        let mut grad = analytic[&d.name].clone();
        for k in 0..d.shape.size() {
            let mut shifted = params.clone();
            let entry = shifted.get_mut(&d.name).expect("bound above");
            let orig = entry.data()[k];
            entry.data_mut()[k] = orig + h;
            let up = loss(&shifted)?;
            shifted.get_mut(&d.name).expect("bound above").data_mut()[k] = orig - h;
            let down = loss(&shifted)?;
            let fd = (up - down) / (2.0 * h);
            let g = analytic[&d.name].data()[k];
            let err = (g - fd).abs() / g.abs().max(fd.abs()).max(GRADCHECK_FLOOR);
            if err > max_rel_error || worst.is_none() {
                max_rel_error = err.max(max_rel_error);
                worst = Some((d.name.clone(), k));
            }
            grad.data_mut()[k] = fd;
        }
        numeric.insert(d.name.clone(), grad);
    }
    Ok(GradCheck {
        max_rel_error,
        worst,
        analytic,
        numeric,
    })
}

fn map_batch<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}
