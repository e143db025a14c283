//! Conduction channels: eigenvectors of the anti-Hermitian part of the
//! embedding potential.
//!
//! A channel with eigenvalue `lambda < 0` is open and carries flux
//! `-2 lambda` when normalised to unity; closed channels have `lambda = 0`.
//! Rescaling an open channel by `1 / sqrt(2 |lambda|)` gives it unit flux.

use crate::embed::{ImSigma, Side};
use crate::error::{Error, Result};
use crate::linalg::{fix_phase, hermitian_eigen, sandwich, CMatrix, CVector};

/// Threshold below which a channel counts as open: `lambda < -tau_open`.
///
/// A finite `eta` leaks eigenvalues of order `eta` into closed channels, so
/// the threshold has to sit well above it.
pub fn default_tau_open(eta: f64) -> f64 {
    1e-10_f64.max(100.0 * eta)
}

#[derive(Debug, Clone)]
pub struct ChannelBasis {
    /// Eigenvalues, ascending (most open first).
    pub lambdas: Vec<f64>,
    /// Orthonormal eigenvectors as columns, phase-fixed.
    pub vectors: CMatrix,
    pub open: Vec<bool>,
    pub tau_open: f64,
    pub energy: f64,
    pub side: Side,
    pub k: Option<f64>,
}

pub fn channel_decomposition(im_sigma: &ImSigma, tau_open: f64) -> ChannelBasis {
    let eig = hermitian_eigen(&im_sigma.matrix);
    let mut vectors = eig.vectors;
    for j in 0..vectors.ncols() {
        let mut col: CVector = vectors.column(j).into_owned();
        fix_phase(&mut col);
        vectors.set_column(j, &col);
    }
    let open = eig.values.iter().map(|&l| l < -tau_open).collect();
    ChannelBasis {
        lambdas: eig.values,
        vectors,
        open,
        tau_open,
        energy: im_sigma.energy,
        side: im_sigma.side,
        k: im_sigma.k,
    }
}

impl ChannelBasis {
    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    pub fn n_open(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    pub fn open_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.open[i]).collect()
    }

    pub fn unit_norm(&self, i: usize) -> CVector {
        self.vectors.column(i).into_owned()
    }

    /// `psi_i / sqrt(2 |lambda_i|)`; an error for closed channels.
    pub fn unit_flux(&self, i: usize) -> Result<CVector> {
        if !self.open[i] {
            return Err(Error::ClosedChannelFlux {
                index: i,
                lambda: self.lambdas[i],
            });
        }
        Ok(self.unit_norm(i).unscale((2.0 * self.lambdas[i].abs()).sqrt()))
    }

    /// Unit-flux open channels as columns, in ascending-lambda order.
    pub fn unit_flux_open(&self) -> CMatrix {
        let idx = self.open_indices();
        let mut out = CMatrix::zeros(self.n(), idx.len());
        for (col, &i) in idx.iter().enumerate() {
            out.set_column(col, &self.unit_flux(i).expect("index is open"));
        }
        out
    }

    pub fn open_lambdas(&self) -> Vec<f64> {
        self.open_indices().iter().map(|&i| self.lambdas[i]).collect()
    }
}

/// Flux `-2 psi^H Sigma~ psi` carried out through the interface.
pub fn flux(psi: &CVector, im_sigma: &ImSigma) -> f64 {
    -2.0 * sandwich(psi, &im_sigma.matrix, psi).re
}

/// Current from layer `n` to layer `n + 1` through the coupling `h`
/// (`h` couples layer `n` to `n + 1`): `-2 Im(psi_n^H h psi_next)`.
pub fn bond_current(psi_n: &CVector, psi_next: &CVector, h: &CMatrix) -> f64 {
    -2.0 * sandwich(psi_n, h, psi_next).im
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// `sum_i lambda_i psi_i psi_i^H` over all channels.
    UnitNorm,
    /// Same sum restricted to open channels.
    UnitNormOpen,
    /// `-2 sum_open lambda_i^2 u_i u_i^H` with unit-flux `u_i`.
    UnitFluxOpen,
}

pub fn reconstruct_im_sigma(basis: &ChannelBasis, convention: Convention) -> CMatrix {
    let n = basis.n();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        match convention {
            Convention::UnitNorm => {
                let p = basis.unit_norm(i);
                out += (&p * p.adjoint()).scale(basis.lambdas[i]);
            }
            Convention::UnitNormOpen if basis.open[i] => {
                let p = basis.unit_norm(i);
                out += (&p * p.adjoint()).scale(basis.lambdas[i]);
            }
            Convention::UnitFluxOpen if basis.open[i] => {
                let u = basis.unit_flux(i).expect("index is open");
                out += (&u * u.adjoint()).scale(-2.0 * basis.lambdas[i] * basis.lambdas[i]);
            }
            _ => {}
        }
    }
    out
}
