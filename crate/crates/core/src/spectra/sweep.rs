//! Energy (and transverse-momentum) sweeps of channels and transmission.

use rayon::prelude::*;
use serde::Serialize;

use crate::bloch::TAU_PROP;
use crate::channels::{channel_decomposition, default_tau_open, ChannelBasis};
use crate::embed::{embedding_potential, EmbeddingPotential, ImSigma, Side, TAU_PSD};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::transport::{device_eta, device_green, transmission, DeviceGreenFunction, TransmissionResult};

/// Everything computed for one model at one `(E, K)`.
#[derive(Debug, Clone)]
pub struct PointAnalysis {
    pub energy: f64,
    pub k: Option<f64>,
    pub eta: f64,
    pub sigma_l: EmbeddingPotential,
    pub sigma_r: EmbeddingPotential,
    pub im_l: ImSigma,
    pub im_r: ImSigma,
    pub channels_l: ChannelBasis,
    pub channels_r: ChannelBasis,
    pub green: DeviceGreenFunction,
    pub transmission: TransmissionResult,
}

impl PointAnalysis {
    pub fn channels(&self, side: Side) -> &ChannelBasis {
        match side {
            Side::Left => &self.channels_l,
            Side::Right => &self.channels_r,
        }
    }

    pub fn im_sigma(&self, side: Side) -> &ImSigma {
        match side {
            Side::Left => &self.im_l,
            Side::Right => &self.im_r,
        }
    }
}

/// Channels of both leads and the two-terminal transmission at `(e, k)`.
///
/// Leads are evaluated at `e + i eta`; the device itself is broadened only
/// when one of the leads has no open channel.
pub fn analyze_point(model: &Model, e: f64, k: Option<f64>, eta: f64) -> Result<PointAnalysis> {
    let blocks_l = model.lead_left.blocks(k)?;
    let blocks_r = model.lead_right.blocks(k)?;
    let device = model.device_at(k)?;
    let sigma_l = embedding_potential(&blocks_l, Side::Left, e, eta)?;
    let sigma_r = embedding_potential(&blocks_r, Side::Right, e, eta)?;
    let im_l = sigma_l.im_sigma();
    let im_r = sigma_r.im_sigma();
    let tau_open = default_tau_open(eta);
    let channels_l = channel_decomposition(&im_l, tau_open);
    let channels_r = channel_decomposition(&im_r, tau_open);
    let eta_c = device_eta(channels_l.n_open(), channels_r.n_open(), eta);
    let green = device_green(&device, &sigma_l, &sigma_r, e, eta_c)?;
    let transmission = transmission(&green, &im_l, &im_r, &channels_l, &channels_r);
    Ok(PointAnalysis {
        energy: e,
        k,
        eta,
        sigma_l,
        sigma_r,
        im_l,
        im_r,
        channels_l,
        channels_r,
        green,
        transmission,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PointRecord {
    pub energy: f64,
    pub k: Option<f64>,
    /// `None` on success, otherwise the error that stopped this point.
    pub error: Option<String>,
    /// True when the error came from the numerics rather than the input.
    pub numerical_failure: bool,
    pub lambdas_l: Vec<f64>,
    pub lambdas_r: Vec<f64>,
    pub n_open_l: usize,
    pub n_open_r: usize,
    pub t_trace: f64,
    pub t_channel_sum: f64,
    pub discrepancy: f64,
}

impl PointRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn lambdas(&self, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.lambdas_l,
            Side::Right => &self.lambdas_r,
        }
    }

    fn from_analysis(a: &PointAnalysis) -> Self {
        PointRecord {
            energy: a.energy,
            k: a.k,
            error: None,
            numerical_failure: false,
            lambdas_l: a.channels_l.lambdas.clone(),
            lambdas_r: a.channels_r.lambdas.clone(),
            n_open_l: a.channels_l.n_open(),
            n_open_r: a.channels_r.n_open(),
            t_trace: a.transmission.total_trace,
            t_channel_sum: a.transmission.total_channel_sum,
            discrepancy: a.transmission.discrepancy,
        }
    }

    fn failed(energy: f64, k: Option<f64>, err: &Error) -> Self {
        PointRecord {
            energy,
            k,
            error: Some(err.to_string()),
            numerical_failure: err.is_numerical(),
            lambdas_l: Vec::new(),
            lambdas_r: Vec::new(),
            n_open_l: 0,
            n_open_r: 0,
            t_trace: f64::NAN,
            t_channel_sum: f64::NAN,
            discrepancy: f64::NAN,
        }
    }
}

/// Transmission summed over the transverse momenta at one energy.
#[derive(Debug, Clone, Serialize)]
pub struct KSumRecord {
    pub energy: f64,
    pub t_trace: f64,
    pub t_channel_sum: f64,
    pub discrepancy: f64,
    pub n_open_l: usize,
    pub n_open_r: usize,
    /// False if any K point at this energy failed.
    pub complete: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepMetadata {
    pub model_hash: String,
    pub eta: f64,
    pub tau_open: f64,
    pub tau_prop: f64,
    pub tau_psd: f64,
    pub version: String,
}

impl SweepMetadata {
    pub fn new(model: &Model, eta: f64) -> Self {
        SweepMetadata {
            model_hash: model.hash(),
            eta,
            tau_open: default_tau_open(eta),
            tau_prop: TAU_PROP,
            tau_psd: TAU_PSD,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub grid: Vec<f64>,
    pub k_list: Vec<Option<f64>>,
    /// Energy-major: all K points of `grid[0]`, then of `grid[1]`, ...
    pub records: Vec<PointRecord>,
    /// One entry per energy when more than one K point is swept.
    pub k_sums: Vec<KSumRecord>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    /// Records of a single K point, in grid order.
    pub fn at_k(&self, k_index: usize) -> impl Iterator<Item = &PointRecord> {
        self.records.iter().skip(k_index).step_by(self.k_list.len())
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }
}

/// `npts` evenly spaced energies from `emin` to `emax` inclusive.
pub fn energy_grid(emin: f64, emax: f64, npts: usize) -> Result<Vec<f64>> {
    if npts == 0 {
        return Err(Error::InvalidParameter {
            name: "npts".into(),
            message: "energy grid is empty".into(),
        });
    }
    if !(emin.is_finite() && emax.is_finite()) || (npts > 1 && emax <= emin) {
        return Err(Error::InvalidParameter {
            name: "emin/emax".into(),
            message: format!("need finite emin < emax, got [{emin}, {emax}]"),
        });
    }
    if npts == 1 {
        return Ok(vec![emin]);
    }
    let step = (emax - emin) / (npts - 1) as f64;
    Ok((0..npts)
        .map(|i| if i == npts - 1 { emax } else { emin + step * i as f64 })
        .collect())
}

/// Evaluate every `(E, K)` pair; failures are recorded per point.
///
/// An empty `k_list` means the model's own K grid (or no K at all).
pub fn sweep(model: &Model, grid: &[f64], eta: f64, k_list: &[Option<f64>]) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "grid".into(),
            message: "energy grid is empty".into(),
        });
    }
    if let Some(w) = grid.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter {
            name: "grid".into(),
            message: format!("energies must increase strictly ({} then {})", w[0], w[1]),
        });
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidEta(eta));
    }
    let k_list: Vec<Option<f64>> = if k_list.is_empty() { model.k_points() } else { k_list.to_vec() };
    for k in &k_list {
        model.lead_left.blocks(*k)?;
    }

    let nk = k_list.len();
    let records: Vec<PointRecord> = (0..grid.len() * nk)
        .into_par_iter()
        .map(|idx| {
            let (e, k) = (grid[idx / nk], k_list[idx % nk]);
            match analyze_point(model, e, k, eta) {
                Ok(a) => PointRecord::from_analysis(&a),
                Err(err) => PointRecord::failed(e, k, &err),
            }
        })
        .collect();

    let k_sums = if nk > 1 {
        records
            .chunks(nk)
            .map(|chunk| {
                let t_trace: f64 = chunk.iter().map(|r| r.t_trace).sum();
                let t_channel_sum: f64 = chunk.iter().map(|r| r.t_channel_sum).sum();
                KSumRecord {
                    energy: chunk[0].energy,
                    t_trace,
                    t_channel_sum,
                    discrepancy: (t_trace - t_channel_sum).abs(),
                    n_open_l: chunk.iter().map(|r| r.n_open_l).sum(),
                    n_open_r: chunk.iter().map(|r| r.n_open_r).sum(),
                    complete: chunk.iter().all(|r| r.is_ok()),
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(SweepResult {
        grid: grid.to_vec(),
        k_list,
        records,
        k_sums,
        metadata: SweepMetadata::new(model, eta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = energy_grid(-2.5, 2.5, 500).unwrap();
        assert_eq!(g.len(), 500);
        assert_eq!(g[0], -2.5);
        assert_eq!(g[499], 2.5);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(energy_grid(0.0, 1.0, 0).is_err());
    }
}
