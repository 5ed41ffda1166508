//! Cones, Euclidean projections onto them, and derivatives of the projections.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConeKind {
    Zero,
    Free,
    Nonneg,
    Soc,
}

impl ConeKind {
    pub fn dual(self) -> ConeKind {
        match self {
            ConeKind::Zero => ConeKind::Free,
            ConeKind::Free => ConeKind::Zero,
            k => k,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ConeBlock {
    pub kind: ConeKind,
    pub dim: usize,
}

impl ConeBlock {
    pub fn new(kind: ConeKind, dim: usize) -> Self {
        ConeBlock { kind, dim }
    }

    pub fn dual(self) -> ConeBlock {
        ConeBlock {
            kind: self.kind.dual(),
            dim: self.dim,
        }
    }

    // A one-dimensional second-order cone is the half-line.
    fn effective_kind(self) -> ConeKind {
        if self.kind == ConeKind::Soc && self.dim == 1 {
            ConeKind::Nonneg
        } else {
            self.kind
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("vector of length {found} does not match cone dimension {expected}")]
pub struct DimensionError {
    pub expected: usize,
    pub found: usize,
}

/// Product cone `{0}^zero × R_+^nonneg × SOC(d_1) × ...`, in that row order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConeSpec {
    pub zero: usize,
    pub nonneg: usize,
    pub soc: Vec<usize>,
}

impl ConeSpec {
    pub fn rows(&self) -> usize {
        self.zero + self.nonneg + self.soc.iter().sum::<usize>()
    }

    /// Non-empty blocks in row order.
    pub fn blocks(&self) -> Vec<ConeBlock> {
        let mut out = Vec::with_capacity(2 + self.soc.len());
        if self.zero > 0 {
            out.push(ConeBlock::new(ConeKind::Zero, self.zero));
        }
        if self.nonneg > 0 {
            out.push(ConeBlock::new(ConeKind::Nonneg, self.nonneg));
        }
        out.extend(self.soc.iter().map(|&d| ConeBlock::new(ConeKind::Soc, d)));
        out
    }

    pub fn dual_blocks(&self) -> Vec<ConeBlock> {
        self.blocks().into_iter().map(ConeBlock::dual).collect()
    }
}

fn check(block: ConeBlock, len: usize) -> Result<(), DimensionError> {
    if block.dim == len {
        Ok(())
    } else {
        Err(DimensionError {
            expected: block.dim,
            found: len,
        })
    }
}

pub fn project(block: ConeBlock, v: &[f64]) -> Result<Vec<f64>, DimensionError> {
    check(block, v.len())?;
    let mut out = vec![0.0; v.len()];
    project_into(block, v, &mut out);
    Ok(out)
}

pub(crate) fn project_into(block: ConeBlock, v: &[f64], out: &mut [f64]) {
    match block.effective_kind() {
        ConeKind::Zero => out.fill(0.0),
        ConeKind::Free => out.copy_from_slice(v),
        ConeKind::Nonneg => out.iter_mut().zip(v).for_each(|(o, x)| *o = x.max(0.0)),
        ConeKind::Soc => {
            let t = v[0];
            let r = norm(&v[1..]);
            if r <= t {
                out.copy_from_slice(v);
            } else if r <= -t {
                out.fill(0.0);
            } else {
                let a = 0.5 * (t + r);
                out[0] = a;
                let s = a / r;
                out[1..].iter_mut().zip(&v[1..]).for_each(|(o, x)| *o = s * x);
            }
        }
    }
}

/// Derivative of [`project`] at `v` applied to `dv`. At nonsmooth points a fixed
/// element of the generalized Jacobian is used: the nonneg mask is strict, the
/// second-order cone boundary uses the mantle formula, and the apex gives `I/2`.
pub fn dproject(block: ConeBlock, v: &[f64], dv: &[f64]) -> Result<Vec<f64>, DimensionError> {
    check(block, v.len())?;
    check(block, dv.len())?;
    let mut out = vec![0.0; v.len()];
    dproject_into(block, v, dv, &mut out);
    Ok(out)
}

pub(crate) fn dproject_into(block: ConeBlock, v: &[f64], dv: &[f64], out: &mut [f64]) {
    match block.effective_kind() {
        ConeKind::Zero => out.fill(0.0),
        ConeKind::Free => out.copy_from_slice(dv),
        ConeKind::Nonneg => {
            for ((o, x), d) in out.iter_mut().zip(v).zip(dv) {
                *o = if *x > 0.0 { *d } else { 0.0 };
            }
        }
        ConeKind::Soc => {
            let t = v[0];
            let r = norm(&v[1..]);
            if r < t {
                out.copy_from_slice(dv);
            } else if r < -t {
                out.fill(0.0);
            } else if r == 0.0 {
                out.iter_mut().zip(dv).for_each(|(o, d)| *o = 0.5 * d);
            } else {
                let ratio = t / r;
                let dt = dv[0];
                let xdx: f64 = v[1..].iter().zip(&dv[1..]).map(|(x, d)| x * d).sum::<f64>() / r;
                out[0] = 0.5 * (dt + xdx);
                for ((o, x), d) in out[1..].iter_mut().zip(&v[1..]).zip(&dv[1..]) {
                    let xh = x / r;
                    *o = 0.5 * (dt * xh + (1.0 + ratio) * d - ratio * xh * xdx);
                }
            }
        }
    }
}

/// Dense Jacobian of [`project`] at `v`.
pub fn jacobian(block: ConeBlock, v: &[f64]) -> Result<DMatrix<f64>, DimensionError> {
    check(block, v.len())?;
    let n = v.len();
    let mut j = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for k in 0..n {
        e[k] = 1.0;
        dproject_into(block, v, &e, &mut col);
        j.column_mut(k).copy_from_slice(&col);
        e[k] = 0.0;
    }
    Ok(j)
}

fn embedding_check(z: &[f64], spec: &ConeSpec, n: usize) -> Result<(), DimensionError> {
    let expected = n + spec.rows() + 1;
    if z.len() == expected {
        Ok(())
    } else {
        Err(DimensionError {
            expected,
            found: z.len(),
        })
    }
}

/// Projection onto `R^n × K* × R_+`.
pub fn project_embedding(z: &[f64], spec: &ConeSpec, n: usize) -> Result<Vec<f64>, DimensionError> {
    embedding_check(z, spec, n)?;
    let mut out = vec![0.0; z.len()];
    out[..n].copy_from_slice(&z[..n]);
    let mut off = n;
    for b in spec.dual_blocks() {
        project_into(b, &z[off..off + b.dim], &mut out[off..off + b.dim]);
        off += b.dim;
    }
    out[off] = z[off].max(0.0);
    Ok(out)
}

pub fn dproject_embedding(z: &[f64], spec: &ConeSpec, n: usize, dz: &[f64]) -> Result<Vec<f64>, DimensionError> {
    embedding_check(z, spec, n)?;
    embedding_check(dz, spec, n)?;
    let mut out = vec![0.0; z.len()];
    out[..n].copy_from_slice(&dz[..n]);
    let mut off = n;
    for b in spec.dual_blocks() {
        let r = off..off + b.dim;
        dproject_into(b, &z[r.clone()], &dz[r.clone()], &mut out[r]);
        off += b.dim;
    }
    out[off] = if z[off] > 0.0 { dz[off] } else { 0.0 };
    Ok(out)
}

/// Projection of a length-`m` vector onto `K` (`dual = false`) or `K*`.
pub(crate) fn project_cone(v: &[f64], spec: &ConeSpec, dual: bool, out: &mut [f64]) {
    let blocks = if dual { spec.dual_blocks() } else { spec.blocks() };
    let mut off = 0;
    for b in blocks {
        project_into(b, &v[off..off + b.dim], &mut out[off..off + b.dim]);
        off += b.dim;
    }
}

/// Distance-like violation of `v ∈ K` (or `K*`): `‖v − Π(v)‖`.
pub(crate) fn cone_violation(v: &[f64], spec: &ConeSpec, dual: bool) -> f64 {
    let mut p = vec![0.0; v.len()];
    project_cone(v, spec, dual, &mut p);
    v.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOC3: ConeBlock = ConeBlock {
        kind: ConeKind::Soc,
        dim: 3,
    };

    #[test]
    fn basic_projections() {
        let nn = ConeBlock::new(ConeKind::Nonneg, 2);
        assert_eq!(project(nn, &[1.0, -2.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(project(SOC3, &[2.0, 1.0, 0.0]).unwrap(), vec![2.0, 1.0, 0.0]);
        assert_eq!(project(SOC3, &[0.0, 1.0, 0.0]).unwrap(), vec![0.5, 0.5, 0.0]);
        assert_eq!(project(SOC3, &[-2.0, 1.0, 0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert!(project(SOC3, &[1.0]).is_err());
    }

    #[test]
    fn soc_projection_is_closest_point_on_a_grid() {
        // Brute force over cone points (s, s cos a, s sin a) scaled inward.
        let v = [0.0, 1.0, 0.0];
        let p = project(SOC3, &v).unwrap();
        let d = |u: &[f64]| u.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let best = d(&p);
        for i in 0..=200 {
            let t = i as f64 / 100.0;
            for k in 0..=60 {
                let rad = t * k as f64 / 60.0;
                for a in 0..36 {
                    let ang = a as f64 * std::f64::consts::PI / 18.0;
                    assert!(d(&[t, rad * ang.cos(), rad * ang.sin()]) >= best - 1e-12);
                }
            }
        }
    }

    #[test]
    fn dproject_regions() {
        let nn = ConeBlock::new(ConeKind::Nonneg, 2);
        assert_eq!(dproject(nn, &[1.0, -2.0], &[3.0, 4.0]).unwrap(), vec![3.0, 0.0]);
        assert_eq!(
            dproject(SOC3, &[2.0, 1.0, 0.0], &[0.3, 0.2, 0.1]).unwrap(),
            vec![0.3, 0.2, 0.1]
        );
        assert_eq!(
            dproject(SOC3, &[-2.0, 1.0, 0.0], &[0.3, 0.2, 0.1]).unwrap(),
            vec![0.0; 3]
        );
    }

    #[test]
    fn degenerate_soc_is_halfline() {
        let b = ConeBlock::new(ConeKind::Soc, 1);
        assert_eq!(project(b, &[-1.0]).unwrap(), vec![0.0]);
        assert_eq!(project(b, &[2.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn embedding_projection() {
        let spec = ConeSpec {
            zero: 1,
            nonneg: 1,
            soc: vec![],
        };
        let z = [5.0, 7.0, -1.0, -3.0];
        assert_eq!(project_embedding(&z, &spec, 1).unwrap(), vec![5.0, 7.0, 0.0, 0.0]);
        let z = [5.0, 7.0, 2.0, 1.0];
        assert_eq!(project_embedding(&z, &spec, 1).unwrap(), z.to_vec());
    }
}
