//! Semismooth Newton refinement on the normalized residual map
//! `F(z) = (Q − I) Π(z) + z`, `z = (x, y − s, 1)`, with `w` held at 1.

use crate::canon::ConeProgramData;
use crate::cone;
use crate::diff::{LinearOperator, MOperator, PseudoInverse, SkewData};

use super::{reconstruct, relative_residual};

const MAX_STEPS: usize = 20;

/// Refined primal-dual point.
#[derive(Clone, Debug, PartialEq)]
pub struct Polished {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub steps: usize,
    /// Largest scaled KKT residual of the refined point.
    pub residual: f64,
}

fn residual_map(data: &ConeProgramData, skew: &SkewData<'_>, z: &[f64]) -> Vec<f64> {
    let n = data.num_vars();
    let m = data.num_rows();
    let mut pi = z.to_vec();
    cone::project_cone(&z[n..n + m], &data.cones, true, &mut pi[n..n + m]);
    pi[n + m] = pi[n + m].max(0.0);
    let qp = skew.mul(&pi);
    qp.iter().zip(&pi).zip(z).map(|((q, p), z)| q - p + z).collect()
}

/// Newton iterations with a backtracking line search starting from `(x, y, s)`.
/// Returns `None` when no step reduces `‖F‖`.
pub fn polish(data: &ConeProgramData, x: &[f64], y: &[f64], s: &[f64]) -> Option<Polished> {
    let (n, m) = (data.num_vars(), data.num_rows());
    let skew = SkewData::new(data);
    let mut z = x.to_vec();
    z.extend(y.iter().zip(s).map(|(y, s)| y - s));
    z.push(1.0);
    let mut f = residual_map(data, &skew, &z);
    let mut fnorm = cone::norm(&f);
    let mut steps = 0;
    while steps < MAX_STEPS && fnorm > 0.0 {
        let jac = MOperator::new(data, &z, true);
        debug_assert_eq!(jac.ncols(), n + m);
        let pinv = PseudoInverse::new(jac.dense(), 1e-12);
        let d = pinv.solve(&f);
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-6 {
            let mut trial = z.clone();
            trial[..n + m].iter_mut().zip(&d).for_each(|(z, d)| *z -= t * d);
            let ft = residual_map(data, &skew, &trial);
            let norm_t = cone::norm(&ft);
            if norm_t <= (1.0 - 1e-4 * t) * fnorm {
                accepted = Some((trial, ft, norm_t));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, ft, norm_t)) = accepted else { break };
        z = trial;
        f = ft;
        let gain = fnorm / norm_t.max(f64::MIN_POSITIVE);
        fnorm = norm_t;
        steps += 1;
        if gain < 1.5 && t == 1.0 && fnorm < 1e-13 {
            break;
        }
    }
    if steps == 0 {
        return None;
    }
    let (x, y, s) = reconstruct(&z, &data.cones, n);
    let residual = relative_residual(data, &x, &y, &s);
    Some(Polished {
        x,
        y,
        s,
        steps,
        residual,
    })
}
