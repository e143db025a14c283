//! Invariant checks of a model at a handful of sample energies.

use serde::Serialize;

use super::sweep::analyze_point;
use crate::bloch::{bloch_flux_matrix, bloch_states, channel_transform};
use crate::channels::{flux, reconstruct_im_sigma, Convention};
use crate::embed::{Side, TAU_PSD};
use crate::error::Result;
use crate::linalg::{max_abs, CMatrix};
use crate::model::Model;

/// Default broadening for validation runs. Leakage into closed channels is
/// of order `eta / sqrt(delta)` at a distance `delta` from a band edge and
/// must stay below every tolerance checked.
pub const ETA_VALIDATE: f64 = 1e-12;

/// Fractions of the total band width at which a model is sampled.
const SAMPLE_FRACTIONS: [f64; 5] = [0.113, 0.297, 0.519, 0.683, 0.871];

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub energy: f64,
    pub k: Option<f64>,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Sample energies spread over the bulk bands of the two leads.
///
/// Gap energies are avoided: near a surface-state pole the broadening
/// leaks eigenvalues far above `eta` into closed channels.
pub fn sample_energies(model: &Model) -> Result<Vec<f64>> {
    let mut intervals = Vec::new();
    for k in model.k_points() {
        for lead in [&model.lead_left, &model.lead_right] {
            intervals.extend(lead.blocks(k)?.band_intervals(257));
        }
    }
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in intervals {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    let total: f64 = merged.iter().map(|(a, b)| b - a).sum();
    Ok(SAMPLE_FRACTIONS
        .iter()
        .map(|f| {
            let mut pos = f * total;
            for &(a, b) in &merged {
                if pos <= b - a {
                    return a + pos;
                }
                pos -= b - a;
            }
            merged.last().map_or(0.0, |m| m.1)
        })
        .collect())
}

pub fn validate_model(model: &Model, eta: f64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for e in sample_energies(model)? {
        for k in model.k_points() {
            check_point(model, e, k, eta, &mut out)?;
        }
    }
    Ok(out)
}

fn check_point(model: &Model, e: f64, k: Option<f64>, eta: f64, out: &mut Vec<CheckResult>) -> Result<()> {
    let mut push = |name: String, value: f64, tolerance: f64| {
        out.push(CheckResult {
            energy: e,
            k,
            pass: value <= tolerance,
            name,
            value,
            tolerance,
        })
    };
    let a = analyze_point(model, e, k, eta)?;
    for side in [Side::Left, Side::Right] {
        let tag = side.name();
        let blocks = model.lead(side).blocks(k)?;
        let sig = match side {
            Side::Left => &a.sigma_l,
            Side::Right => &a.sigma_r,
        };
        let im = a.im_sigma(side);
        let ch = a.channels(side);
        push(format!("{tag}: largest eigenvalue of Im Sigma"), im.max_eigenvalue(), TAU_PSD);
        push(format!("{tag}: (z - h00 - Sigma) g - 1"), sig.identity_residual(&blocks), 1e-9);
        if blocks.is_real() {
            push(format!("{tag}: Sigma - Sigma^T"), max_abs(&(&sig.sigma - sig.sigma.transpose())), 1e-10);
        }
        let flux_err = (0..ch.n())
            .map(|i| (flux(&ch.unit_norm(i), im) + 2.0 * ch.lambdas[i]).abs())
            .fold(0.0, f64::max);
        push(format!("{tag}: flux(psi_i) + 2 lambda_i"), flux_err, 1e-10);
        let recon = max_abs(&(reconstruct_im_sigma(ch, Convention::UnitNormOpen) - &im.matrix));
        push(format!("{tag}: open-channel reconstruction"), recon, 1e-10);
        let spectrum = bloch_states(&blocks, side, e)?;
        let residual = spectrum.states.iter().map(|s| s.residual).fold(0.0, f64::max);
        push(format!("{tag}: Bloch residual"), residual, 1e-9);
        let count = (spectrum.n_outgoing() as f64 - ch.n_open() as f64).abs();
        push(format!("{tag}: outgoing Bloch count - open channel count"), count, 0.0);
        if count == 0.0 && ch.n_open() > 0 {
            let u = spectrum.unit_flux_outgoing(im)?;
            let f = bloch_flux_matrix(&u, im);
            let m = f.nrows();
            let dev = max_abs(&(f - CMatrix::from_diagonal_element(m, m, (-0.5).into())));
            push(format!("{tag}: Bloch flux matrix + 1/2"), dev, 1e-9);
            let t = channel_transform(&u, ch)?;
            push(format!("{tag}: channel transform unitarity"), t.unitarity_residual, 1e-8);
        }
    }
    push("device: (z - H - Sigma) G - 1".into(), a.green.residual, 1e-9);
    let t = &a.transmission;
    push("transmission: channel sum - trace".into(), t.discrepancy, 1e-9);
    let bound = t.n_open_l.min(t.n_open_r) as f64;
    push("transmission: total above open-channel bound".into(), (t.total_trace - bound).max(0.0), 1e-8);
    Ok(())
}
