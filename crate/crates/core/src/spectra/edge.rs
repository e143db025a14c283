//! Power-law fits of channel eigenvalues near a band edge.
//!
//! Near an edge `E0` the largest channel eigenvalue magnitude behaves as
//! `|lambda| ~ |E - E0|^p`: `p = 1/2` when the edge state has weight on the
//! surface, `p = -1/2` when it vanishes there.

use serde::Serialize;

use super::sweep::SweepResult;
use crate::embed::Side;
use crate::error::{Error, Result};

pub const MIN_FIT_POINTS: usize = 8;
/// The fit window must stay this many multiples of eta away from the edge.
pub const BROADENING_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSide {
    Above,
    Below,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeFit {
    pub e0: f64,
    pub window: (f64, f64),
    pub exponent: f64,
    pub stderr: f64,
    pub side: EdgeSide,
    pub lead: Side,
    pub points: usize,
}

/// `npts` log-spaced offsets in `[dmin, dmax]` on each requested side of
/// `e0`, as an ascending energy grid.
pub fn edge_grid(e0: f64, window: (f64, f64), npts: usize, side: Option<EdgeSide>) -> Result<Vec<f64>> {
    check_window(window)?;
    let (l0, l1) = (window.0.ln(), window.1.ln());
    let offsets: Vec<f64> = (0..npts)
        .map(|i| {
            let f = if npts == 1 { 0.0 } else { i as f64 / (npts - 1) as f64 };
            (l0 + (l1 - l0) * f).exp()
        })
        .collect();
    let mut grid = Vec::with_capacity(2 * npts);
    if side != Some(EdgeSide::Above) {
        grid.extend(offsets.iter().rev().map(|d| e0 - d));
    }
    if side != Some(EdgeSide::Below) {
        grid.extend(offsets.iter().map(|d| e0 + d));
    }
    Ok(grid)
}

fn check_window(window: (f64, f64)) -> Result<()> {
    if window.0 > 0.0 && window.1 > window.0 && window.1.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "window".into(),
            message: format!("need 0 < dmin < dmax, got ({}, {})", window.0, window.1),
        })
    }
}

/// Least-squares slope of `ln |lambda_min|` against `ln |E - E0|` over the
/// sweep points (first K point) whose offset lies inside `window`.
///
/// With `side = None` the side where the channel is open is used.
pub fn fit_band_edge(
    sweep: &SweepResult,
    lead: Side,
    e0: f64,
    window: (f64, f64),
    side: Option<EdgeSide>,
) -> Result<EdgeFit> {
    check_window(window)?;
    let limit = BROADENING_FACTOR * sweep.metadata.eta;
    if window.0 < limit {
        return Err(Error::WindowInBroadening { dmin: window.0, limit });
    }
    let tau_open = sweep.metadata.tau_open;
    let collect = |s: EdgeSide| -> Vec<(f64, f64, bool)> {
        sweep
            .at_k(0)
            .filter(|r| r.is_ok())
            .filter_map(|r| {
                let d = r.energy - e0;
                let on_side = match s {
                    EdgeSide::Above => d > 0.0,
                    EdgeSide::Below => d < 0.0,
                };
                let lam = r.lambdas(lead).first().copied()?;
                (on_side && d.abs() >= window.0 && d.abs() <= window.1 && lam < 0.0)
                    .then_some((d.abs(), -lam, lam < -tau_open))
            })
            .collect()
    };
    let side = side.unwrap_or_else(|| {
        let open = |s| collect(s).iter().filter(|p| p.2).count();
        if open(EdgeSide::Below) > open(EdgeSide::Above) {
            EdgeSide::Below
        } else {
            EdgeSide::Above
        }
    });
    let pts = collect(side);
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints {
            found: pts.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (exponent, stderr) = linear_fit(&xs, &ys);
    Ok(EdgeFit {
        e0,
        window,
        exponent,
        stderr,
        side,
        lead,
        points: pts.len(),
    })
}

/// Slope of the least-squares line through `(x, y)` and its standard error.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = if xs.len() > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (slope, stderr)
}
