//! Reference solutions computed without the cone solver or its linear algebra.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("upper bounds must be nonnegative and sum to at least one")]
    InfeasibleBounds,
    #[error("bound vector has length {found}, expected {expected}")]
    Length { expected: usize, found: usize },
    #[error("KKT matrix is singular")]
    SingularKkt,
    #[error("no feasible vertex")]
    NoVertex,
}

/// Euclidean projection onto `{y : 1ᵀy = 1, 0 ≤ y ≤ u}` (`u = ∞` when absent).
///
/// Without bounds: sort descending and pick the largest `ρ` with
/// `x_(ρ) > (Σ_{i≤ρ} x_(i) − 1)/ρ`. With bounds, `y_i = clip(x_i − τ, 0, u_i)`
/// and `τ` is found by bisection on the monotone map `τ ↦ Σ y_i(τ)`, then made
/// exact on the resulting free set.
pub fn simplex_projection(x: &[f64], upper: Option<&[f64]>) -> Result<Vec<f64>, OracleError> {
    let Some(u) = upper else {
        let mut sorted = x.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut cum = 0.0;
        let mut tau = 0.0;
        for (k, v) in sorted.iter().enumerate() {
            cum += v;
            let t = (cum - 1.0) / (k + 1) as f64;
            if *v > t {
                tau = t;
            }
        }
        return Ok(x.iter().map(|v| (v - tau).max(0.0)).collect());
    };
    if u.len() != x.len() {
        return Err(OracleError::Length {
            expected: x.len(),
            found: u.len(),
        });
    }
    if u.iter().any(|v| *v < 0.0) || u.iter().sum::<f64>() < 1.0 {
        return Err(OracleError::InfeasibleBounds);
    }
    let clip = |tau: f64| -> Vec<f64> { x.iter().zip(u).map(|(x, u)| (x - tau).clamp(0.0, *u)).collect() };
    let total = |tau: f64| clip(tau).iter().sum::<f64>();
    let mut lo = x.iter().zip(u).map(|(x, u)| x - u).fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    // Exact threshold on the free set {0 < x_i − τ < u_i}.
    let y = clip(tau);
    let free: Vec<usize> = (0..x.len()).filter(|&i| y[i] > 0.0 && y[i] < u[i]).collect();
    if free.is_empty() {
        return Ok(y);
    }
    let at_upper: f64 = (0..x.len()).filter(|&i| y[i] >= u[i] && u[i] > 0.0).map(|i| u[i]).sum();
    let tau = (free.iter().map(|&i| x[i]).sum::<f64>() + at_upper - 1.0) / free.len() as f64;
    let mut out = y;
    for &i in &free {
        out[i] = x[i] - tau;
    }
    Ok(out)
}

/// Solves `[[Q, Aᵀ], [A, 0]] (x, ν) = (−q, b)`.
pub fn eq_qp(
    q_mat: &DMatrix<f64>,
    q: &[f64],
    a: &DMatrix<f64>,
    b: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), OracleError> {
    let (n, m) = (q.len(), b.len());
    let mut kkt = DMatrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(q_mat);
    if m > 0 {
        kkt.view_mut((n, 0), (m, n)).copy_from(a);
        kkt.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    }
    let mut rhs = DVector::zeros(n + m);
    for i in 0..n {
        rhs[i] = -q[i];
    }
    for i in 0..m {
        rhs[n + i] = b[i];
    }
    let lu = kkt.lu();
    let sol = lu.solve(&rhs).ok_or(OracleError::SingularKkt)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(OracleError::SingularKkt);
    }
    Ok((
        sol.rows(0, n).iter().cloned().collect(),
        sol.rows(n, m).iter().cloned().collect(),
    ))
}

/// `argmin cᵀx s.t. Gx ≤ h` by checking every vertex of a bounded polytope.
pub fn lp_vertex_enumeration(c: &[f64], g: &[Vec<f64>], h: &[f64]) -> Result<Vec<f64>, OracleError> {
    let n = c.len();
    let p = g.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut subset: Vec<usize> = (0..n).collect();
    if n == 0 || p < n {
        return Err(OracleError::NoVertex);
    }
    loop {
        let mut mat = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for (r, &i) in subset.iter().enumerate() {
            for j in 0..n {
                mat[(r, j)] = g[i][j];
            }
            rhs[r] = h[i];
        }
        if mat.determinant().abs() > 1e-12 {
            if let Some(x) = mat.lu().solve(&rhs) {
                let feasible = g
                    .iter()
                    .zip(h)
                    .all(|(row, hi)| row.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() <= hi + 1e-9);
                if feasible {
                    let obj: f64 = c.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                    if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                        best = Some((obj, x.iter().cloned().collect()));
                    }
                }
            }
        }
        // Next n-subset in lexicographic order.
        let mut k = n;
        while k > 0 && subset[k - 1] == p - n + k - 1 {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        subset[k - 1] += 1;
        for t in k..n {
            subset[t] = subset[t - 1] + 1;
        }
    }
    best.map(|(_, x)| x).ok_or(OracleError::NoVertex)
}
