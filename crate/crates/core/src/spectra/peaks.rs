//! Surface-state peaks of the channel eigenvalues inside lead gaps.
//!
//! A lead state localised at its own surface makes `Sigma` singular at an
//! isolated gap energy. At finite `eta` the pole becomes a Lorentzian of
//! width `~eta` and height `~1/eta` in the largest `|lambda|`. Such a state
//! carries no flux, so the transmission at the peak stays at zero.

use serde::Serialize;

use super::sweep::analyze_point;
use crate::bloch::bloch_states;
use crate::embed::{embedding_potential, Side};
use crate::error::{Error, Result};
use crate::model::Model;

/// Peaks must exceed the local background by this factor.
pub const PEAK_CONTRAST: f64 = 10.0;
/// Grid points on each side used for the local background.
const BACKGROUND_HALF_WIDTH: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct Peak {
    pub energy: f64,
    /// Largest `|lambda|` at the peak.
    pub height: f64,
    /// Full width at half maximum.
    pub width: f64,
    pub eta: f64,
    pub background: f64,
    /// Trace-formula transmission at the peak energy.
    pub transmission: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingCheck {
    pub energy: f64,
    pub eta_small: f64,
    pub eta_large: f64,
    /// `height(eta_small) / height(eta_large)`
    pub ratio: f64,
    /// `eta_large / eta_small`, the ratio of a pure pole.
    pub expected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeakReport {
    pub lead: Side,
    pub k: Option<f64>,
    pub peaks: Vec<Peak>,
    pub scaling: Vec<ScalingCheck>,
}

fn largest_magnitude(model: &Model, lead: Side, k: Option<f64>, e: f64, eta: f64) -> Result<f64> {
    let blocks = model.lead(lead).blocks(k)?;
    let sig = embedding_potential(&blocks, lead, e, eta)?;
    let top = crate::linalg::hermitian_eigen(&sig.im_sigma().matrix).values[0];
    Ok((-top).max(0.0))
}

/// Scan `grid` at every broadening in `eta_list` for isolated gap peaks of
/// the largest channel eigenvalue magnitude of `lead`.
pub fn detect_peaks(model: &Model, grid: &[f64], eta_list: &[f64], lead: Side, k: Option<f64>) -> Result<PeakReport> {
    if grid.len() < 3 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter {
            name: "grid".into(),
            message: "need at least three strictly increasing energies".into(),
        });
    }
    if let Some(&bad) = eta_list.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidEta(bad));
    }
    let lo = eta_list.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eta_list.iter().copied().fold(0.0, f64::max);
    if eta_list.len() < 2 || hi < 10.0 * lo * (1.0 - 1e-9) {
        return Err(Error::InvalidParameter {
            name: "eta".into(),
            message: "need at least two broadenings differing by a factor of 10 or more".into(),
        });
    }

    let mut peaks = Vec::new();
    for &eta in eta_list {
        let profile = |e: f64| largest_magnitude(model, lead, k, e, eta).unwrap_or(f64::NAN);
        let ys: Vec<f64> = grid.iter().map(|&e| profile(e)).collect();
        for i in 1..grid.len() - 1 {
            let (l, y, r) = (ys[i - 1], ys[i], ys[i + 1]);
            if !(y >= l && y > r) {
                continue;
            }
            let background = local_background(&ys, i);
            if !(y > PEAK_CONTRAST * background) {
                continue;
            }
            let energy = golden_max(&profile, grid[i - 1], grid[i + 1], 1e-3 * eta);
            let height = profile(energy);
            // Only states inside a gap of the lead qualify.
            let blocks = model.lead(lead).blocks(k)?;
            if bloch_states(&blocks, lead, energy)?.states.iter().any(|s| s.propagating) {
                continue;
            }
            if !(height > PEAK_CONTRAST * background) {
                continue;
            }
            let half = 0.5 * height;
            let left = bisect_level(&profile, grid[i - 1], energy, half);
            let right = bisect_level(&profile, energy, grid[i + 1], half);
            let transmission = analyze_point(model, energy, k, eta)?.transmission.total_trace;
            peaks.push(Peak {
                energy,
                height,
                width: right - left,
                eta,
                background,
                transmission,
            });
        }
    }

    let mut scaling = Vec::new();
    let mut etas: Vec<f64> = eta_list.to_vec();
    etas.sort_by(f64::total_cmp);
    for small in peaks.iter().filter(|p| p.eta == etas[0]) {
        let large_eta = etas
            .iter()
            .copied()
            .filter(|&e| e >= 10.0 * small.eta * (1.0 - 1e-9))
            .fold(f64::INFINITY, |best, e| {
                if (e / small.eta - 10.0).abs() < (best / small.eta - 10.0).abs() {
                    e
                } else {
                    best
                }
            });
        let partner = peaks
            .iter()
            .filter(|p| p.eta == large_eta)
            .min_by(|a, b| (a.energy - small.energy).abs().total_cmp(&(b.energy - small.energy).abs()));
        if let Some(p) = partner {
            scaling.push(ScalingCheck {
                energy: small.energy,
                eta_small: small.eta,
                eta_large: p.eta,
                ratio: small.height / p.height,
                expected: p.eta / small.eta,
            });
        }
    }
    Ok(PeakReport { lead, k, peaks, scaling })
}

/// Median of the neighbouring grid values, skipping the candidate and its
/// immediate neighbours.
fn local_background(ys: &[f64], i: usize) -> f64 {
    let lo = i.saturating_sub(BACKGROUND_HALF_WIDTH);
    let hi = (i + BACKGROUND_HALF_WIDTH).min(ys.len() - 1);
    let mut vals: Vec<f64> = (lo..=hi)
        .filter(|&j| j + 1 < i || j > i + 1)
        .map(|j| ys[j])
        .filter(|y| y.is_finite())
        .collect();
    if vals.is_empty() {
        return 0.0;
    }
    vals.sort_by(f64::total_cmp);
    vals[vals.len() / 2]
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
    }
    0.5 * (a + b)
}

/// Point in `[a, b]` where the monotone `f` crosses `level`.
fn bisect_level(f: &dyn Fn(f64) -> f64, a: f64, b: f64, level: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    let rising = f(b) > f(a);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if (f(mid) < level) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
