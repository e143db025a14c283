//! Surface Green functions and embedding potentials of semi-infinite leads.
//!
//! Every lead is handled in its own oriented frame: layer 0 is the surface,
//! layers 1, 2, ... run into the bulk, and `v` couples layer `m` to `m + 1`.
//! For the right lead `v = h01`; for the left lead `v = h01^H`. Then
//!
//! ```text
//! g     = (z - h00 - v g v^H)^-1          surface Green function
//! Sigma = v g v^H                          embedding potential
//! ```
//!
//! with `z = E + i eta`. `Sigma` acts on a layer that couples to the lead
//! surface exactly as a lead layer would.

use crate::bloch::Pencil;
use crate::error::{Error, Result};
use crate::linalg::{self, c, hermitian_eigen, inverse, max_abs, norm1, CMatrix, C64};
use crate::model::HamiltonianBlocks;

/// Default broadening for single-energy evaluations.
pub const ETA_POINT: f64 = 1e-8;
/// Default broadening for energy sweeps.
pub const ETA_SWEEP: f64 = 1e-6;
/// Largest eigenvalue of the anti-Hermitian part still counted as non-positive.
pub const TAU_PSD: f64 = 1e-10;
/// Default cap on layer doublings.
pub const MAX_DOUBLINGS: usize = 200;
/// Accepted fixed-point residual `|(z - h00 - v g v^H) g - 1|_max`.
pub const FIXED_POINT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    /// Coupling from an oriented layer to the next one deeper into the lead.
    pub fn into_bulk(self, blocks: &HamiltonianBlocks) -> CMatrix {
        match self {
            Side::Right => blocks.h01.clone(),
            Side::Left => blocks.h01.adjoint(),
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceMethod {
    /// Layer-doubling decimation.
    Decimation,
    /// Ordered Schur form of the transfer pencil, used where decimation
    /// stalls or loses precision (near lead resonances at small eta).
    InvariantSubspace,
}

#[derive(Debug, Clone)]
pub struct SurfaceGreen {
    pub g: CMatrix,
    pub method: SurfaceMethod,
    pub iterations: usize,
    pub residual: f64,
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidEta(eta))
    }
}

/// Retarded surface Green function of the lead on `side` at `e + i eta`.
pub fn surface_green(blocks: &HamiltonianBlocks, side: Side, e: f64, eta: f64) -> Result<SurfaceGreen> {
    surface_green_with(blocks, side, e, eta, MAX_DOUBLINGS)
}

pub fn surface_green_with(
    blocks: &HamiltonianBlocks,
    side: Side,
    e: f64,
    eta: f64,
    max_iter: usize,
) -> Result<SurfaceGreen> {
    check_eta(eta)?;
    let z = c(e, eta);
    let h00 = &blocks.h00;
    let v = side.into_bulk(blocks);

    let mut best: Option<SurfaceGreen> = None;
    let mut last_err = None;
    match decimate(h00, &v, z, max_iter) {
        Ok((g, iterations)) => {
            let residual = fixed_point_residual(h00, &v, z, &g);
            let sg = SurfaceGreen {
                g,
                method: SurfaceMethod::Decimation,
                iterations,
                residual,
            };
            if residual <= accept_tol(h00, &v, z, &sg.g) && is_retarded(&sg.g) {
                return Ok(sg);
            }
            best = Some(sg);
        }
        Err(err) => last_err = Some(err),
    }
    match subspace_green(h00, &v, z) {
        Ok(g) => {
            let residual = fixed_point_residual(h00, &v, z, &g);
            let iterations = best.as_ref().map_or(max_iter, |b| b.iterations);
            let sg = SurfaceGreen {
                g,
                method: SurfaceMethod::InvariantSubspace,
                iterations,
                residual,
            };
            if residual <= accept_tol(h00, &v, z, &sg.g) && is_retarded(&sg.g) {
                return Ok(sg);
            }
            if best.as_ref().is_none_or(|b| sg.residual < b.residual) {
                best = Some(sg);
            }
        }
        Err(err) => last_err = Some(err),
    }
    match best {
        Some(b) => Err(Error::NoConvergence {
            iterations: b.iterations,
            residual: b.residual,
        }),
        None => Err(last_err.unwrap_or(Error::NoConvergence {
            iterations: max_iter,
            residual: f64::INFINITY,
        })),
    }
}

/// Near a pole of `g` the attainable residual is limited by conditioning.
fn accept_tol(h00: &CMatrix, v: &CMatrix, z: C64, g: &CMatrix) -> f64 {
    let scale = z.norm() + norm1(h00) + 2.0 * norm1(v) * norm1(v) * norm1(g);
    FIXED_POINT_TOL.max(64.0 * f64::EPSILON * scale * norm1(g))
}

/// `max |(z - h00 - v g v^H) g - 1|`
pub fn fixed_point_residual(h00: &CMatrix, v: &CMatrix, z: C64, g: &CMatrix) -> f64 {
    let n = h00.nrows();
    let m = CMatrix::from_diagonal_element(n, n, z) - h00 - v * g * v.adjoint();
    max_abs(&(m * g - CMatrix::identity(n, n)))
}

fn is_retarded(g: &CMatrix) -> bool {
    let top = hermitian_eigen(&linalg::anti_hermitian_part(g)).values.last().copied().unwrap_or(0.0);
    top <= 1e-9 * max_abs(g).max(1.0)
}

/// Layer doubling: after `k` steps the effective surface couples only to
/// layer `2^k`, through couplings that decay as the lead Green function does.
fn decimate(h00: &CMatrix, v: &CMatrix, z: C64, max_iter: usize) -> Result<(CMatrix, usize)> {
    let n = h00.nrows();
    let zi = CMatrix::from_diagonal_element(n, n, z);
    let mut es = h00.clone();
    let mut e = h00.clone();
    let mut a = v.clone();
    let mut b = v.adjoint();
    let scale = (norm1(h00) + norm1(v)).max(1.0);
    for it in 1..=max_iter {
        let gi = inverse(&(&zi - &e), "decimation step")?;
        let agb = &a * &gi * &b;
        let bga = &b * &gi * &a;
        es += &agb;
        e += agb + bga;
        a = &a * &gi * &a;
        b = &b * &gi * &b;
        if max_abs(&a) + max_abs(&b) < 1e-16 * scale {
            let g = inverse(&(&zi - &es), "decimated surface")?;
            return Ok((g, it));
        }
    }
    let g = inverse(&(&zi - &es), "decimated surface")?;
    let residual = fixed_point_residual(h00, v, z, &g);
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Surface Green function from the invariant subspace of decaying (or, on
/// the unit circle, outgoing) solutions of the transfer pencil.
fn subspace_green(h00: &CMatrix, v: &CMatrix, z: C64) -> Result<CMatrix> {
    let n = h00.nrows();
    let f = Pencil::new(h00, v, z)?.retarded_transfer()?;
    let sigma = v * f;
    inverse(
        &(CMatrix::from_diagonal_element(n, n, z) - h00 - sigma),
        "surface Green function",
    )
}

/// Embedding potential of one lead at a single complex energy.
#[derive(Debug, Clone)]
pub struct EmbeddingPotential {
    pub sigma: CMatrix,
    pub g: CMatrix,
    pub energy: f64,
    pub eta: f64,
    pub side: Side,
    pub k: Option<f64>,
    pub method: SurfaceMethod,
    pub residual: f64,
}

/// Hermitian matrix `(Sigma - Sigma^H) / 2i`, the flux operator of the interface.
#[derive(Debug, Clone)]
pub struct ImSigma {
    pub matrix: CMatrix,
    pub energy: f64,
    pub side: Side,
    pub k: Option<f64>,
}

impl ImSigma {
    pub fn from_matrix(matrix: CMatrix, energy: f64, side: Side, k: Option<f64>) -> Self {
        Self {
            matrix: linalg::hermitize(&matrix),
            energy,
            side,
            k,
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.matrix).values.last().copied().unwrap_or(0.0)
    }
}

pub fn embedding_potential(blocks: &HamiltonianBlocks, side: Side, e: f64, eta: f64) -> Result<EmbeddingPotential> {
    let sg = surface_green(blocks, side, e, eta)?;
    let v = side.into_bulk(blocks);
    let sigma = &v * &sg.g * v.adjoint();
    Ok(EmbeddingPotential {
        sigma,
        g: sg.g,
        energy: e,
        eta,
        side,
        k: blocks.k,
        method: sg.method,
        residual: sg.residual,
    })
}

impl EmbeddingPotential {
    /// `max |(z - h00 - Sigma) g - 1|`: the discrete statement that
    /// `Sigma` is the inverse surface Green function up to `z - h00`.
    pub fn identity_residual(&self, blocks: &HamiltonianBlocks) -> f64 {
        let n = self.sigma.nrows();
        let z = c(self.energy, self.eta);
        let m = CMatrix::from_diagonal_element(n, n, z) - &blocks.h00 - &self.sigma;
        max_abs(&(m * &self.g - CMatrix::identity(n, n)))
    }

    pub fn im_sigma(&self) -> ImSigma {
        anti_hermitian_part(self)
    }
}

pub fn anti_hermitian_part(sig: &EmbeddingPotential) -> ImSigma {
    ImSigma {
        matrix: linalg::anti_hermitian_part(&sig.sigma),
        energy: sig.energy,
        side: sig.side,
        k: sig.k,
    }
}

/// Closed-form surface Green function of a uniform chain (on-site `eps`,
/// hopping `-t`) at complex energy `z`: the root of `t^2 g^2 - (z - eps) g + 1 = 0`
/// with `|t g| <= 1`, ties broken toward `Im g <= 0`.
pub fn chain_surface_green(t: f64, eps: f64, z: C64) -> C64 {
    let w = z - eps;
    let root = (w * w - 4.0 * t * t).sqrt();
    let g1 = (w + root) / (2.0 * t * t);
    let g2 = (w - root) / (2.0 * t * t);
    let (m1, m2) = ((t * g1).norm(), (t * g2).norm());
    if (m1 - m2).abs() <= 1e-12 {
        if g1.im <= g2.im {
            g1
        } else {
            g2
        }
    } else if m1 < m2 {
        g1
    } else {
        g2
    }
}

/// Closed-form chain embedding potential `t^2 g`.
///
/// In the band this is `-t e^{ik}` with `E = eps - 2t cos k`. The continuum
/// free-particle value `-ik/2` (normal-derivative convention) is its
/// long-wavelength analogue and is not computed here.
pub fn chain_sigma(t: f64, eps: f64, z: C64) -> C64 {
    t * t * chain_surface_green(t, eps, z)
}
