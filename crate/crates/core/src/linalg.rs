//! Dense complex linear algebra used throughout the crate.
//!
//! Everything works on `nalgebra` dynamic matrices of `Complex64`. Surface
//! dimensions are small (tens of orbitals), so all routines are dense and
//! favour robustness over speed.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_vec(v: &CVector) -> f64 {
    v.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest elementwise deviation `|m_ij - conj(m_ji)|` and where it occurs.
pub fn hermiticity_defect(m: &CMatrix) -> (usize, usize, f64) {
    let mut worst = (0, 0, 0.0);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst.2 {
                worst = (i, j, d);
            }
        }
    }
    worst
}

/// `(m - m^H) / 2i`, stored symmetrized so the result is exactly Hermitian.
pub fn anti_hermitian_part(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = c(m[(i, i)].im, 0.0);
        for j in (i + 1)..n {
            let v = (m[(i, j)] - m[(j, i)].conj()) / (2.0 * I);
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    out
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

pub fn trace(m: &CMatrix) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

pub fn norm1(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse with a 1-norm condition estimate; fails on (numerically) singular input.
pub fn inverse(m: &CMatrix, context: &str) -> Result<CMatrix> {
    let n = m.nrows();
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let inv = m.clone().lu().try_inverse().ok_or_else(|| Error::Singular {
        context: context.to_string(),
        condition: f64::INFINITY,
    })?;
    let cond = norm1(m) * norm1(&inv);
    if !cond.is_finite() || cond > 1e15 {
        return Err(Error::Singular {
            context: context.to_string(),
            condition: cond,
        });
    }
    Ok(inv)
}

pub fn condition_estimate(m: &CMatrix) -> f64 {
    match m.clone().lu().try_inverse() {
        Some(inv) => norm1(m) * norm1(&inv),
        None => f64::INFINITY,
    }
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(m: &CMatrix) -> HermitianEigen {
    let n = m.nrows();
    if n == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    HermitianEigen { values, vectors }
}

/// Multiply a vector by a unit phase so its largest-magnitude component is
/// real and positive. Ties within a relative 1e-9 go to the lowest index.
pub fn fix_phase(v: &mut CVector) {
    let top = max_abs_vec(v);
    if top == 0.0 {
        return;
    }
    let idx = v
        .iter()
        .position(|z| z.norm() >= top * (1.0 - 1e-9))
        .unwrap_or(0);
    let phase = v[idx].conj() / v[idx].norm();
    v.iter_mut().for_each(|z| *z *= phase);
}

/// Complex Schur form `m = q t q^H` with `t` upper triangular.
pub fn complex_schur(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let schur = Schur::try_new(m.clone(), 1e-15, 10_000).ok_or_else(|| Error::IllConditionedPencil {
        message: "Schur iteration did not converge".into(),
        condition: f64::INFINITY,
    })?;
    let (q, mut t) = schur.unpack();
    // Clean the strictly lower part; the iteration leaves roundoff there.
    for j in 0..t.ncols() {
        for i in (j + 1)..t.nrows() {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((q, t))
}

/// Reorder a complex Schur form so that all diagonal entries accepted by
/// `select` come first. Returns the number of selected entries.
pub fn reorder_schur(q: &mut CMatrix, t: &mut CMatrix, select: impl Fn(C64) -> bool) -> usize {
    let n = t.nrows();
    let mut placed = 0;
    for k in 0..n {
        if !select(t[(k, k)]) {
            continue;
        }
        let mut pos = k;
        while pos > placed {
            swap_adjacent(q, t, pos - 1);
            pos -= 1;
        }
        placed += 1;
    }
    placed
}

/// Swap diagonal entries `k` and `k + 1` of an upper-triangular Schur factor
/// with a single Givens rotation.
fn swap_adjacent(q: &mut CMatrix, t: &mut CMatrix, k: usize) {
    let n = t.nrows();
    let a = t[(k, k)];
    let b = t[(k, k + 1)];
    let d = t[(k + 1, k + 1)];
    // Eigenvector of [[a, b], [0, d]] for eigenvalue d.
    let x1 = b;
    let x2 = d - a;
    let r = (x1.norm_sqr() + x2.norm_sqr()).sqrt();
    if r == 0.0 {
        return;
    }
    let (x1, x2) = (x1 / r, x2 / r);
    // rot = [[x1, -conj(x2)], [x2, conj(x1)]]
    for row in 0..n {
        let u = t[(row, k)];
        let w = t[(row, k + 1)];
        t[(row, k)] = u * x1 + w * x2;
        t[(row, k + 1)] = -u * x2.conj() + w * x1.conj();
        let u = q[(row, k)];
        let w = q[(row, k + 1)];
        q[(row, k)] = u * x1 + w * x2;
        q[(row, k + 1)] = -u * x2.conj() + w * x1.conj();
    }
    for col in 0..n {
        let u = t[(k, col)];
        let w = t[(k + 1, col)];
        t[(k, col)] = x1.conj() * u + x2.conj() * w;
        t[(k + 1, col)] = -x2 * u + x1 * w;
    }
    t[(k + 1, k)] = C64::new(0.0, 0.0);
}

/// Orthonormal basis for the `dim` right singular vectors with the smallest
/// singular values, together with those singular values.
pub fn null_space(m: &CMatrix, dim: usize) -> (CMatrix, Vec<f64>) {
    let n = m.ncols();
    let svd = SVD::new(m.clone(), false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let dim = dim.min(order.len());
    let mut basis = CMatrix::zeros(n, dim);
    let mut sigmas = Vec::with_capacity(dim);
    for (col, &i) in order.iter().take(dim).enumerate() {
        for r in 0..n {
            basis[(r, col)] = v_t[(i, r)].conj();
        }
        sigmas.push(svd.singular_values[i]);
    }
    (basis, sigmas)
}

/// `u^H m v`
pub fn sandwich(u: &CVector, m: &CMatrix, v: &CVector) -> C64 {
    u.dotc(&(m * v))
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
