//! Random cone programs with a known primal-dual solution.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::canon::ConeProgramData;
use crate::cone::ConeSpec;
use crate::sparse::CscMatrix;

/// A cone program together with the point it was built around.
#[derive(Clone, Debug)]
pub struct PlantedProgram {
    pub data: ConeProgramData,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Builds `b = A x⋆ + s⋆` and `c = −Aᵀ y⋆` from random `A` and a strictly
/// complementary pair `(s⋆, y⋆) ∈ K × K*`, so `(x⋆, y⋆, s⋆)` is optimal. Each
/// second-order block is active with `s⋆` and `y⋆` on the boundary, and
/// `n − zero − #soc` randomly chosen nonneg rows are active. Active rows are
/// dense and the inactive ones have density `density`, so the active set
/// generically pins `x⋆` and the solution map is smooth there.
pub fn planted_program<R: Rng + ?Sized>(rng: &mut R, n: usize, cones: &ConeSpec, density: f64) -> PlantedProgram {
    let m = cones.rows();
    let active = n.saturating_sub(cones.zero + cones.soc.len()).min(cones.nonneg);
    let mut rows: Vec<usize> = (cones.zero..cones.zero + cones.nonneg).collect();
    rows.shuffle(rng);
    let mut dense = vec![true; m];
    for &i in &rows[active..] {
        dense[i] = false;
    }
    let mut trips = Vec::new();
    for j in 0..n {
        for (i, d) in dense.iter().enumerate() {
            if *d || rng.random::<f64>() < density {
                trips.push((i, j, gauss(rng)));
            }
        }
    }
    // Keep every column and row structurally nonempty.
    for j in 0..n {
        trips.push((j % m.max(1), j, 1.0 + rng.random::<f64>()));
    }
    for i in 0..m {
        trips.push((i, i % n.max(1), gauss(rng)));
    }
    let a = CscMatrix::from_triplets(m, n, &trips);
    let x: Vec<f64> = (0..n).map(|_| gauss(rng)).collect();
    let mut s = vec![0.0; m];
    let mut y = vec![0.0; m];
    for yi in y.iter_mut().take(cones.zero) {
        *yi = gauss(rng);
    }
    for (k, &i) in rows.iter().enumerate() {
        let v = 0.5 + rng.random::<f64>();
        if k < active {
            y[i] = v;
        } else {
            s[i] = v;
        }
    }
    let mut off = cones.zero + cones.nonneg;
    for &d in &cones.soc {
        let u: Vec<f64> = (1..d).map(|_| gauss(rng)).collect();
        let r = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = 0.5 + rng.random::<f64>();
        s[off] = r;
        y[off] = scale * r;
        for (k, ui) in u.iter().enumerate() {
            s[off + 1 + k] = *ui;
            y[off + 1 + k] = -scale * ui;
        }
        off += d;
    }
    let mut b = a.mul_vec(&x);
    b.iter_mut().zip(&s).for_each(|(b, s)| *b += s);
    let c = a.mul_t_vec(&y).into_iter().map(|v| -v).collect();
    PlantedProgram {
        data: ConeProgramData {
            a,
            b,
            c,
            cones: cones.clone(),
        },
        x,
        y,
        s,
    }
}

/// Sparse QP `min ½‖x‖² + qᵀx s.t. Gx ≤ h` in cone form, for exercising the
/// iterative differentiation path at sizes where dense factorizations are
/// impractical. Columns are `(x, t)` with `‖x‖² ≤ t` written as the cone
/// `(1 + t, 1 − t, 2x) ∈ SOC(n + 2)` and objective `½t + qᵀx`. `G` has about
/// `density · n` nonzeros per row and `x = 0` is strictly feasible.
pub fn sparse_qp<R: Rng + ?Sized>(rng: &mut R, n: usize, p: usize, density: f64) -> ConeProgramData {
    let mut trips = Vec::new();
    for i in 0..p {
        for j in 0..n {
            if rng.random::<f64>() < density {
                trips.push((i, j, gauss(rng)));
            }
        }
        trips.push((i, rng.random_range(0..n), 1.0));
    }
    // SOC rows: 1 + t ≥ ‖(1 − t, 2x)‖ as b − A·(x, t) with b = (1, 1, 0…).
    trips.push((p, n, -1.0));
    trips.push((p + 1, n, 1.0));
    for j in 0..n {
        trips.push((p + 2 + j, j, -2.0));
    }
    let a = CscMatrix::from_triplets(p + n + 2, n + 1, &trips);
    let mut b = vec![0.0; p + n + 2];
    for bi in b.iter_mut().take(p) {
        *bi = rng.random_range(0.1..1.0);
    }
    b[p] = 1.0;
    b[p + 1] = 1.0;
    let mut c: Vec<f64> = (0..n).map(|_| 3.0 * gauss(rng)).collect();
    c.push(0.5);
    ConeProgramData {
        a,
        b,
        c,
        cones: ConeSpec {
            zero: 0,
            nonneg: p,
            soc: vec![n + 2],
        },
    }
}
