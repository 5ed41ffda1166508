//! The compiled affine map from parameters to cone-program data.

use crate::array::Values;
use crate::cone::{ConeKind, ConeSpec};
use crate::expr::analysis::{product_coefficient, Rules};
use crate::expr::{Expr, Leaf, Node, Problem};
use crate::sparse::CscMatrix;

use super::layout::Layout;
use super::lower::{is_affine_tree, lower, LoweredProblem};
use super::tensor::{psi, SparseTensor3};
use super::{CanonError, ConeProgramData};

/// Column and slice indices of declared leaves.
pub struct LeafIndex<'a> {
    variables: &'a Layout,
    parameters: &'a Layout,
}

impl<'a> LeafIndex<'a> {
    pub fn new(variables: &'a Layout, parameters: &'a Layout) -> Self {
        LeafIndex { variables, parameters }
    }

    fn dims(&self, rows: usize) -> (usize, usize, usize) {
        (rows, self.variables.size() + 1, self.parameters.size() + 1)
    }
}

/// Base-case tensor of a leaf.
///
/// A variable is one-hot onto its columns in the constant slice, a parameter is
/// one-hot onto its slices in the constant column, and a constant holds its values
/// in the constant column of the constant slice.
pub fn leaf_tensor(leaf: &Leaf, index: &LeafIndex<'_>) -> Result<SparseTensor3, CanonError> {
    let size = leaf.shape().size();
    let dims = index.dims(size);
    let (const_col, const_slice) = (dims.1 - 1, dims.2 - 1);
    let entries = match leaf {
        Leaf::Variable { name, .. } => {
            let e = index
                .variables
                .get(name)
                .ok_or_else(|| CanonError::UndeclaredLeaf(name.clone()))?;
            (0..size).map(|i| (i, e.offset + i, const_slice, 1.0)).collect()
        }
        Leaf::Parameter { name, .. } => {
            let e = index
                .parameters
                .get(name)
                .ok_or_else(|| CanonError::UndeclaredLeaf(name.clone()))?;
            (0..size).map(|i| (i, const_col, e.offset + i, 1.0)).collect()
        }
        Leaf::Constant(a) => a
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| (i, const_col, const_slice, *v))
            .collect(),
    };
    Ok(SparseTensor3::new(dims, entries))
}

/// Tensor of an affine expression: `vec(expr) = Σ_k T[:, :, k] θ̃_k · (x, 1)`.
pub fn expr_tensor(expr: &Expr, index: &LeafIndex<'_>) -> Result<SparseTensor3, CanonError> {
    let (atom, args) = match expr.node() {
        Node::Leaf(leaf) => return leaf_tensor(leaf, index),
        Node::Apply { atom, args } => (atom, args),
    };
    let dims = index.dims(expr.shape().size());
    let slices = dims.2;
    if !atom.id().is_affine() {
        return Err(CanonError::Internal(format!("{} reached tensor extraction", atom.id())));
    }
    if atom.id().is_product() {
        let infos = [args[0].info(), args[1].info()];
        let k = product_coefficient(&infos, Rules::Dpp)
            .ok_or_else(|| CanonError::Internal(format!("{} violates the product rule", atom.id())))?;
        let coef = expr_tensor(&args[k], index)?;
        let other = expr_tensor(&args[1 - k], index)?;
        let const_col = dims.1 - 1;
        let mut coef_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); coef.dims().0];
        for &(i, j, s, v) in coef.entries() {
            if j != const_col {
                return Err(CanonError::Internal("product coefficient depends on variables".into()));
            }
            coef_rows[i].push((s, v));
        }
        let mut t = Vec::new();
        for (out, oi, ci) in atom.product_pattern(args[0].shape(), args[1].shape(), k == 0) {
            for &(s, v) in &coef_rows[ci] {
                t.push((out, oi, s, v));
            }
        }
        let t = SparseTensor3::new((dims.0, other.dims().0, slices), t);
        return Ok(psi(&t, &other)?);
    }
    let shapes: Vec<_> = args.iter().map(|a| a.shape()).collect();
    let mut acc = SparseTensor3::zeros(dims);
    for (arg, action) in args.iter().zip(atom.linear_action(&shapes, expr.shape())) {
        let s = expr_tensor(arg, index)?;
        let t: Vec<_> = action.into_iter().map(|(o, i, c)| (o, i, slices - 1, c)).collect();
        let t = SparseTensor3::new((dims.0, arg.shape().size(), slices), t);
        acc = acc.add(&psi(&t, &s)?)?;
    }
    Ok(acc)
}

/// A problem compiled to affine-solver-affine form.
///
/// With `θ̃ = (θ, 1)`: `c = c_map · θ̃` and `[A b] = Σ_k ab_map[:, :, k] θ̃_k`.
#[derive(Clone, Debug)]
pub struct AsaForm {
    c_map: CscMatrix,
    offset_map: Vec<f64>,
    ab_map: SparseTensor3,
    cones: ConeSpec,
    retrieval: CscMatrix,
    param_layout: Layout,
    variable_layout: Layout,
    cone_variable_layout: Layout,
    objective_sign: f64,
    a_pattern: CscMatrix,
    /// `(destination, slice, coefficient)`; destinations below `nnz(A)` index A's
    /// values, the rest index `b`.
    plan: Vec<(usize, usize, f64)>,
}

pub fn build_asa(lowered: &LoweredProblem) -> Result<AsaForm, CanonError> {
    let variable_layout = Layout::new(&lowered.user_variables);
    let mut cone_variable_layout = variable_layout.clone();
    lowered.aux_variables.iter().for_each(|d| cone_variable_layout.push(d));
    let param_layout = Layout::new(&lowered.parameters);
    let n = cone_variable_layout.size();
    let p = param_layout.size();
    let index = LeafIndex::new(&cone_variable_layout, &param_layout);

    if !is_affine_tree(&lowered.objective) {
        return Err(CanonError::Internal("objective is not affine after lowering".into()));
    }
    let obj = expr_tensor(&lowered.objective, &index)?;
    let mut c_trip = Vec::new();
    let mut offset_map = vec![0.0; p + 1];
    for &(_, j, k, v) in obj.entries() {
        if j == n {
            offset_map[k] += v;
        } else {
            c_trip.push((j, k, v));
        }
    }
    let c_map = CscMatrix::from_triplets(n, p + 1, &c_trip);

    let mut cones = ConeSpec::default();
    let mut ab = Vec::new();
    let mut row = 0;
    for kind in [ConeKind::Zero, ConeKind::Nonneg, ConeKind::Soc] {
        for c in lowered.constraints.iter().filter(|c| c.cone == kind) {
            if !is_affine_tree(&c.expr) {
                return Err(CanonError::Internal("constraint is not affine after lowering".into()));
            }
            let t = expr_tensor(&c.expr, &index)?;
            let rows = c.expr.shape().size();
            // b - A x ∈ K with the constraint expression E x + f gives A = -E, b = f.
            for &(i, j, k, v) in t.entries() {
                ab.push((row + i, j, k, if j == n { v } else { -v }));
            }
            match kind {
                ConeKind::Zero => cones.zero += rows,
                ConeKind::Nonneg => cones.nonneg += rows,
                _ => cones.soc.push(rows),
            }
            row += rows;
        }
    }
    let m = row;
    let ab_map = SparseTensor3::new((m, n + 1, p + 1), ab);

    let pattern: Vec<_> = ab_map
        .entries()
        .iter()
        .filter(|e| e.1 < n)
        .map(|e| (e.0, e.1, 0.0))
        .collect();
    let a_pattern = CscMatrix::from_triplets(m, n, &pattern);
    let nnz = a_pattern.nnz();
    let plan = ab_map
        .entries()
        .iter()
        .map(|&(i, j, k, v)| {
            let dest = if j < n {
                a_pattern.position(i, j).expect("pattern built from the same entries")
            } else {
                nnz + i
            };
            (dest, k, v)
        })
        .collect();

    let n_user = variable_layout.size();
    let retrieval = CscMatrix::from_triplets(n_user, n, &(0..n_user).map(|i| (i, i, 1.0)).collect::<Vec<_>>());

    Ok(AsaForm {
        c_map,
        offset_map,
        ab_map,
        cones,
        retrieval,
        param_layout,
        variable_layout,
        cone_variable_layout,
        objective_sign: lowered.objective_sign,
        a_pattern,
        plan,
    })
}

impl AsaForm {
    pub fn c_map(&self) -> &CscMatrix {
        &self.c_map
    }

    pub fn ab_map(&self) -> &SparseTensor3 {
        &self.ab_map
    }

    pub fn cones(&self) -> &ConeSpec {
        &self.cones
    }

    pub fn retrieval(&self) -> &CscMatrix {
        &self.retrieval
    }

    pub fn param_layout(&self) -> &Layout {
        &self.param_layout
    }

    pub fn variable_layout(&self) -> &Layout {
        &self.variable_layout
    }

    /// User variables followed by epigraph variables.
    pub fn cone_variable_layout(&self) -> &Layout {
        &self.cone_variable_layout
    }

    pub fn num_params(&self) -> usize {
        self.param_layout.size()
    }

    pub fn num_cone_vars(&self) -> usize {
        self.cone_variable_layout.size()
    }

    pub fn num_rows(&self) -> usize {
        self.cones.rows()
    }

    /// Structural pattern of every materialized `A`.
    pub fn a_pattern(&self) -> &CscMatrix {
        &self.a_pattern
    }

    fn theta_tilde(&self, theta: &[f64]) -> Result<Vec<f64>, CanonError> {
        if theta.len() != self.num_params() {
            return Err(CanonError::ParameterLength {
                expected: self.num_params(),
                found: theta.len(),
            });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(CanonError::NonFinite);
        }
        let mut t = theta.to_vec();
        t.push(1.0);
        Ok(t)
    }

    /// Cone-program data for one flattened parameter vector.
    pub fn materialize(&self, theta: &[f64]) -> Result<ConeProgramData, CanonError> {
        let tt = self.theta_tilde(theta)?;
        let nnz = self.a_pattern.nnz();
        let mut buf = vec![0.0; nnz + self.num_rows()];
        for &(dest, k, v) in &self.plan {
            buf[dest] += v * tt[k];
        }
        let b = buf.split_off(nnz);
        Ok(ConeProgramData {
            a: self.a_pattern.with_values(buf),
            b,
            c: self.c_map.mul_vec(&tt),
            cones: self.cones.clone(),
        })
    }

    /// Constant term of the (minimized) objective.
    pub fn objective_offset(&self, theta: &[f64]) -> Result<f64, CanonError> {
        let tt = self.theta_tilde(theta)?;
        Ok(self.offset_map.iter().zip(&tt).map(|(a, b)| a * b).sum())
    }

    /// Objective of the source problem at cone-program point `x`.
    pub fn objective_value(&self, theta: &[f64], c: &[f64], x: &[f64]) -> Result<f64, CanonError> {
        let lin: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
        Ok(self.objective_sign * (lin + self.objective_offset(theta)?))
    }

    /// Transpose of the linear part of [`AsaForm::materialize`]. Only entries of
    /// `da` inside the structural pattern contribute.
    pub fn materialize_adjoint(&self, da: &CscMatrix, db: &[f64], dc: &[f64]) -> Result<Vec<f64>, CanonError> {
        let (m, n) = (self.num_rows(), self.num_cone_vars());
        if da.nrows() != m || da.ncols() != n || db.len() != m || dc.len() != n {
            return Err(CanonError::DataShape);
        }
        let nnz = self.a_pattern.nnz();
        let mut w = Vec::with_capacity(nnz + m);
        if da.col_ptr() == self.a_pattern.col_ptr() && da.row_idx() == self.a_pattern.row_idx() {
            w.extend_from_slice(da.values());
        } else {
            w.extend(self.a_pattern.iter().map(|(i, j, _)| da.get(i, j)));
        }
        w.extend_from_slice(db);
        let p = self.num_params();
        let mut out = vec![0.0; p + 1];
        for &(dest, k, v) in &self.plan {
            out[k] += v * w[dest];
        }
        self.c_map.mul_t_vec_acc(dc, 1.0, &mut out);
        out.truncate(p);
        Ok(out)
    }

    pub fn flatten_params(&self, values: &Values) -> Result<Vec<f64>, CanonError> {
        Ok(self.param_layout.flatten(values)?)
    }

    pub fn unflatten_params(&self, theta: &[f64]) -> Result<Values, CanonError> {
        Ok(self.param_layout.unflatten(theta)?)
    }

    /// Original variable values from a cone-program primal point.
    pub fn retrieve(&self, x: &[f64]) -> Result<Values, CanonError> {
        if x.len() != self.num_cone_vars() {
            return Err(CanonError::DataShape);
        }
        Ok(self.variable_layout.unflatten(&self.retrieval.mul_vec(x))?)
    }

    /// Pulls cotangents on original variables back to the cone-program primal.
    /// Variables absent from `cotangents` contribute zero.
    pub fn retrieve_adjoint(&self, cotangents: &Values) -> Result<Vec<f64>, CanonError> {
        let flat = self.variable_layout.flatten_partial(cotangents)?;
        Ok(self.retrieval.mul_t_vec(&flat))
    }
}

/// Full pipeline for one assignment: substitute parameter values as constants,
/// lower, extract. Used as the reference for the cached path.
pub fn canonicalize_fresh(problem: &Problem, values: &Values) -> Result<ConeProgramData, CanonError> {
    let substituted = problem.substitute_parameters(values)?;
    let asa = build_asa(&lower(&substituted)?)?;
    asa.materialize(&[])
}

/// Lowers and builds in one step.
pub fn compile_asa(problem: &Problem) -> Result<AsaForm, CanonError> {
    build_asa(&lower(problem)?)
}
