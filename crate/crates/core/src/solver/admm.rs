//! ADMM on the homogeneous self-dual embedding.
//!
//! Iterates `ũ = (I + Q)⁻¹(u + v)`, `u⁺ = Π(αũ + (1 − α)u − v)`,
//! `v⁺ = v − αũ − (1 − α)u + u⁺` with `u = (x, y, τ)` and `v = (r, s, κ)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::canon::ConeProgramData;
use crate::cone::{self, ConeSpec};
use crate::sparse::CscMatrix;

use super::{
    dot, is_converged, polish, relative_residual, residuals, ConeSolution, SolveInfo, SolverSettings, Status, WarmStart,
};

const CHECK_EVERY: usize = 5;
const RUIZ_PASSES: usize = 15;
const MIN_NORM: f64 = 1e-6;

/// Row scaling `E` and column scaling `D` with `Ã = E A D`. Rows of one
/// second-order cone share a factor so the cone is preserved.
fn equilibrate(a: &CscMatrix, cones: &ConeSpec) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (a.nrows(), a.ncols());
    let mut group: Vec<usize> = (0..m).collect();
    let mut off = cones.zero + cones.nonneg;
    for &d in &cones.soc {
        for g in group.iter_mut().skip(off).take(d) {
            *g = off;
        }
        off += d;
    }
    let mut e = vec![1.0; m];
    let mut d = vec![1.0; n];
    for _ in 0..RUIZ_PASSES {
        let mut row_max = vec![0.0f64; m];
        for (i, j, v) in a.iter() {
            row_max[group[i]] = row_max[group[i]].max((v * e[i] * d[j]).abs());
        }
        for i in 0..m {
            let r = row_max[group[i]];
            if r > 0.0 {
                e[i] = (e[i] / r.sqrt()).clamp(1e-4, 1e4);
            }
        }
        let mut col_max = vec![0.0f64; n];
        for (i, j, v) in a.iter() {
            col_max[j] = col_max[j].max((v * e[i] * d[j]).abs());
        }
        for j in 0..n {
            if col_max[j] > 0.0 {
                d[j] = (d[j] / col_max[j].sqrt()).clamp(1e-4, 1e4);
            }
        }
    }
    (e, d)
}

/// Solver for `(I + Q) ξ = w` on the scaled data.
struct Kkt {
    a: CscMatrix,
    chol: Cholesky<f64, Dyn>,
    h: Vec<f64>,
    g: Vec<f64>,
    hg: f64,
}

impl Kkt {
    fn new(a: CscMatrix, b: &[f64], c: &[f64]) -> Kkt {
        let n = a.ncols();
        let mut gram = DMatrix::<f64>::identity(n, n);
        let rows = a.transpose();
        for i in 0..rows.ncols() {
            let range = rows.col_ptr()[i]..rows.col_ptr()[i + 1];
            let idx = &rows.row_idx()[range.clone()];
            let val = &rows.values()[range];
            for (p, &j) in idx.iter().enumerate() {
                for (q, &k) in idx.iter().enumerate() {
                    gram[(j, k)] += val[p] * val[q];
                }
            }
        }
        let chol = Cholesky::new(gram).expect("I + AᵀA is positive definite");
        let mut h = c.to_vec();
        h.extend_from_slice(b);
        let mut kkt = Kkt {
            a,
            chol,
            h: h.clone(),
            g: Vec::new(),
            hg: 0.0,
        };
        kkt.g = kkt.solve_m0(&h);
        kkt.hg = dot(&kkt.h, &kkt.g);
        kkt
    }

    /// Solves `[[I, Aᵀ], [−A, I]] (x, y) = (r1, r2)`.
    fn solve_m0(&self, r: &[f64]) -> Vec<f64> {
        let n = self.a.ncols();
        let (r1, r2) = r.split_at(n);
        let mut rhs = r1.to_vec();
        self.a.mul_t_vec_acc(r2, -1.0, &mut rhs);
        let x = self.chol.solve(&DVector::from_vec(rhs));
        let mut out = x.as_slice().to_vec();
        let mut y = r2.to_vec();
        self.a.mul_vec_acc(&out, 1.0, &mut y);
        out.extend(y);
        out
    }

    fn solve(&self, w: &[f64]) -> Vec<f64> {
        let k = w.len() - 1;
        let p = self.solve_m0(&w[..k]);
        let tau = (w[k] + dot(&self.h, &p)) / (1.0 + self.hg);
        let mut out: Vec<f64> = p.iter().zip(&self.g).map(|(p, g)| p - tau * g).collect();
        out.push(tau);
        out
    }
}

fn project_u(u: &mut [f64], cones: &ConeSpec, n: usize) {
    let m = cones.rows();
    let tmp = u[n..n + m].to_vec();
    cone::project_cone(&tmp, cones, true, &mut u[n..n + m]);
    u[n + m] = u[n + m].max(0.0);
}

pub(super) fn run(data: &ConeProgramData, settings: &SolverSettings, warm: Option<&WarmStart>) -> ConeSolution {
    let (n, m) = (data.num_vars(), data.num_rows());
    let dim = n + m + 1;
    let (e, d) = if settings.scale {
        equilibrate(&data.a, &data.cones)
    } else {
        (vec![1.0; m], vec![1.0; n])
    };
    let scaled: Vec<f64> = data.a.iter().map(|(i, j, v)| v * e[i] * d[j]).collect();
    let a_s = data.a.with_values(scaled);
    let mut b_s: Vec<f64> = data.b.iter().zip(&e).map(|(b, e)| b * e).collect();
    let mut c_s: Vec<f64> = data.c.iter().zip(&d).map(|(c, d)| c * d).collect();
    // Unit-norm b and c: x and s scale with sb, y with sc.
    let (sb, sc) = if settings.scale {
        (
            1.0 / cone::norm(&b_s).max(MIN_NORM),
            1.0 / cone::norm(&c_s).max(MIN_NORM),
        )
    } else {
        (1.0, 1.0)
    };
    b_s.iter_mut().for_each(|v| *v *= sb);
    c_s.iter_mut().for_each(|v| *v *= sc);
    let kkt = Kkt::new(a_s, &b_s, &c_s);

    let mut u = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    u[dim - 1] = 1.0;
    v[dim - 1] = 1.0;
    if let Some(w) = warm {
        for j in 0..n {
            u[j] = w.x[j] * sb / d[j];
        }
        for i in 0..m {
            u[n + i] = w.y[i] * sc / e[i];
            v[n + i] = w.s[i] * sb * e[i];
        }
        v[dim - 1] = 0.0;
    }

    let unscale = |u: &[f64], v: &[f64]| {
        let tau = u[dim - 1];
        let x: Vec<f64> = (0..n).map(|j| u[j] * d[j] / (sb * tau)).collect();
        let y: Vec<f64> = (0..m).map(|i| u[n + i] * e[i] / (sc * tau)).collect();
        let s: Vec<f64> = (0..m).map(|i| v[n + i] / (e[i] * sb * tau)).collect();
        (x, y, s)
    };
    let can_polish = settings.polish && dim <= settings.polish_max_dim;
    let mut polish_at = 1e-2;
    let mut info = SolveInfo::default();
    let finish = |x: Vec<f64>, y: Vec<f64>, s: Vec<f64>, status: Status, mut info: SolveInfo| {
        let r = residuals(data, &x, &y, &s);
        info.primal_residual = r.primal;
        info.dual_residual = r.dual;
        info.gap = r.gap;
        ConeSolution { x, y, s, status, info }
    };

    let mut w = vec![0.0; dim];
    let mut arg = vec![0.0; dim];
    for k in 1..=settings.max_iters {
        w.iter_mut().zip(u.iter().zip(&v)).for_each(|(w, (u, v))| *w = u + v);
        let ut = kkt.solve(&w);
        for i in 0..dim {
            let relaxed = settings.alpha * ut[i] + (1.0 - settings.alpha) * u[i];
            arg[i] = relaxed - v[i];
            w[i] = relaxed;
        }
        u.copy_from_slice(&arg);
        project_u(&mut u, &data.cones, n);
        for i in 0..dim {
            v[i] += u[i] - w[i];
        }
        info.iterations = k;
        if k % CHECK_EVERY != 0 && k != settings.max_iters {
            continue;
        }
        let (tau, kappa) = (u[dim - 1], v[dim - 1]);
        if tau > 0.0 {
            let (x, y, s) = unscale(&u, &v);
            let converged = is_converged(data, &x, &y, &s, settings);
            let rel = relative_residual(data, &x, &y, &s);
            if can_polish && (converged || rel <= polish_at) {
                polish_at = rel.min(polish_at) / 10.0;
                if let Some(p) = polish(data, &x, &y, &s) {
                    if is_converged(data, &p.x, &p.y, &p.s, settings) && p.residual <= rel {
                        info.polish_steps = p.steps;
                        return finish(p.x, p.y, p.s, Status::Optimal, info);
                    }
                }
            }
            if converged {
                return finish(x, y, s, Status::Optimal, info);
            }
        }
        if tau <= kappa {
            let y_c: Vec<f64> = (0..m).map(|i| u[n + i] * e[i]).collect();
            let by = dot(&data.b, &y_c);
            if by < 0.0 && cone::norm(&data.a.mul_t_vec(&y_c)) <= settings.eps_infeas * -by {
                let y = y_c.iter().map(|v| v / -by).collect();
                return finish(vec![0.0; n], y, vec![0.0; m], Status::Infeasible, info);
            }
            let x_c: Vec<f64> = (0..n).map(|j| u[j] * d[j]).collect();
            let s_c: Vec<f64> = (0..m).map(|i| v[n + i] / e[i]).collect();
            let cx = dot(&data.c, &x_c);
            if cx < 0.0 {
                let mut r = data.a.mul_vec(&x_c);
                r.iter_mut().zip(&s_c).for_each(|(r, s)| *r += s);
                if cone::norm(&r) <= settings.eps_infeas * -cx {
                    let x = x_c.iter().map(|v| v / -cx).collect();
                    let s = s_c.iter().map(|v| v / -cx).collect();
                    return finish(x, vec![0.0; m], s, Status::Unbounded, info);
                }
            }
        }
    }
    let (x, y, s) = if u[dim - 1] > 0.0 {
        unscale(&u, &v)
    } else {
        (vec![0.0; n], vec![0.0; m], vec![0.0; m])
    };
    finish(x, y, s, Status::MaxIters, info)
}
