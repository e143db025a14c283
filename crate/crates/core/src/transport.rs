//! Two-terminal transmission through an embedded device.
//!
//! A lead enters the device through its coupling matrix `C` (lead layer x
//! device): the embedded potential is `C^H Sigma C`. This is the only place
//! where lead and device indices meet.

use crate::channels::{flux, ChannelBasis};
use crate::embed::{EmbeddingPotential, ImSigma};
use crate::error::{Error, Result};
use crate::linalg::{c, inverse, max_abs, trace, CMatrix, CVector, I};
use crate::model::DeviceSpec;

/// Embed a lead-layer operator into device indices: `C^H m C`.
pub fn embed_into_device(coupling: &CMatrix, m: &CMatrix) -> CMatrix {
    coupling.adjoint() * m * coupling
}

#[derive(Debug, Clone)]
pub struct DeviceGreenFunction {
    pub g: CMatrix,
    /// `C_r G C_l^H`: propagation from the left surface to the right one.
    pub g_rl: CMatrix,
    /// `C_l G C_r^H`
    pub g_lr: CMatrix,
    pub coupling_left: CMatrix,
    pub coupling_right: CMatrix,
    pub energy: f64,
    pub eta: f64,
    /// `max |(z - H_C - Sigma_l - Sigma_r) G - 1|`
    pub residual: f64,
}

/// `G = (E + i eta - H_C - C_l^H Sigma_l C_l - C_r^H Sigma_r C_r)^-1`.
///
/// `eta = 0` is allowed; the solve then fails as singular at device bound
/// states that no lead broadens.
pub fn device_green(
    device: &DeviceSpec,
    sig_l: &EmbeddingPotential,
    sig_r: &EmbeddingPotential,
    e: f64,
    eta: f64,
) -> Result<DeviceGreenFunction> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidEta(eta));
    }
    for (name, cpl, sig) in [
        ("coupling_left", &device.coupling_left, &sig_l.sigma),
        ("coupling_right", &device.coupling_right, &sig_r.sigma),
    ] {
        if cpl.nrows() != sig.nrows() {
            return Err(Error::DimensionMismatch {
                first: name.into(),
                first_dims: cpl.shape(),
                second: "embedding potential".into(),
                second_dims: sig.shape(),
            });
        }
    }
    let n = device.size();
    let m = CMatrix::from_diagonal_element(n, n, c(e, eta))
        - &device.h_c
        - embed_into_device(&device.coupling_left, &sig_l.sigma)
        - embed_into_device(&device.coupling_right, &sig_r.sigma);
    let g = inverse(&m, "device Green function")?;
    let residual = max_abs(&(&m * &g - CMatrix::identity(n, n)));
    let g_rl = &device.coupling_right * &g * device.coupling_left.adjoint();
    let g_lr = &device.coupling_left * &g * device.coupling_right.adjoint();
    Ok(DeviceGreenFunction {
        g,
        g_rl,
        g_lr,
        coupling_left: device.coupling_left.clone(),
        coupling_right: device.coupling_right.clone(),
        energy: e,
        eta,
        residual,
    })
}

/// Device broadening: none when both leads already supply an imaginary
/// part through open channels, `eta` otherwise.
pub fn device_eta(n_open_l: usize, n_open_r: usize, eta: f64) -> f64 {
    if n_open_l > 0 && n_open_r > 0 {
        0.0
    } else {
        eta
    }
}

/// Full device wave function for an incident wave whose left-surface
/// amplitude is `psi_inc`: `chi = -2i G C_l^H Sigma~_l psi_inc`.
pub fn scattered_wave(g: &DeviceGreenFunction, im_l: &ImSigma, psi_inc: &CVector) -> Result<CVector> {
    if psi_inc.len() != im_l.n() || im_l.n() != g.coupling_left.nrows() {
        return Err(Error::DimensionMismatch {
            first: "incident wave".into(),
            first_dims: (psi_inc.len(), 1),
            second: "left surface".into(),
            second_dims: (g.coupling_left.nrows(), im_l.n()),
        });
    }
    let source = g.coupling_left.adjoint() * (&im_l.matrix * psi_inc);
    Ok((&g.g * source) * (-2.0 * I))
}

/// Flux of a device wave function out through the right surface.
pub fn right_flux(g: &DeviceGreenFunction, im_r: &ImSigma, chi: &CVector) -> f64 {
    flux(&(&g.coupling_right * chi), im_r)
}

/// Channel amplitudes `t_ij = -4i lambda_i^l |lambda_j^r| (u_j^r)^H G_rl u_i^l`
/// for unit-flux open channels; rows are left (entrance) channels.
pub fn t_matrix(g_rl: &CMatrix, channels_l: &ChannelBasis, channels_r: &ChannelBasis) -> CMatrix {
    let ul = channels_l.unit_flux_open();
    let ur = channels_r.unit_flux_open();
    let ll = channels_l.open_lambdas();
    let lr = channels_r.open_lambdas();
    let proj = ur.adjoint() * g_rl * &ul;
    CMatrix::from_fn(ll.len(), lr.len(), |i, j| -4.0 * I * ll[i] * lr[j].abs() * proj[(j, i)])
}

#[derive(Debug, Clone)]
pub struct TransmissionResult {
    pub t: CMatrix,
    /// `|t_ij|^2`
    pub t_squared: Vec<Vec<f64>>,
    pub total_channel_sum: f64,
    /// `4 Tr[G_rl Sigma~_l G_rl^H Sigma~_r]`
    pub total_trace: f64,
    pub discrepancy: f64,
    pub n_open_l: usize,
    pub n_open_r: usize,
}

pub fn transmission(
    g: &DeviceGreenFunction,
    im_l: &ImSigma,
    im_r: &ImSigma,
    channels_l: &ChannelBasis,
    channels_r: &ChannelBasis,
) -> TransmissionResult {
    let t = t_matrix(&g.g_rl, channels_l, channels_r);
    let t_squared: Vec<Vec<f64>> = (0..t.nrows())
        .map(|i| (0..t.ncols()).map(|j| t[(i, j)].norm_sqr()).collect())
        .collect();
    let total_channel_sum = t_squared.iter().flatten().sum();
    let total_trace = 4.0 * trace(&(&g.g_rl * &im_l.matrix * g.g_rl.adjoint() * &im_r.matrix)).re;
    TransmissionResult {
        t,
        t_squared,
        total_channel_sum,
        total_trace,
        discrepancy: (total_channel_sum - total_trace).abs(),
        n_open_l: channels_l.n_open(),
        n_open_r: channels_r.n_open(),
    }
}
