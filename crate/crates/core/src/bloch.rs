//! Fixed-energy Bloch states of a lead and their relation to channels.
//!
//! In the oriented frame of a lead (see [`crate::embed`]) a Bloch state has
//! layer amplitudes `psi_m = beta^m phi` with
//!
//! ```text
//! (E - h00 - beta v - beta^-1 v^H) phi = 0.
//! ```
//!
//! The quadratic problem is linearised on `xi = [phi; beta phi]` as the pencil
//! `A xi = beta B xi`, `A = [[0, 1], [-v^H, E - h00]]`, `B = [[1, 0], [0, v]]`,
//! and solved through a shift-and-invert Schur form so that singular `v`
//! (infinite or zero `beta`) needs no special treatment.

use crate::channels::{flux, ChannelBasis};
use crate::embed::{ImSigma, Side};
use crate::error::{Error, Result};
use crate::linalg::{
    self, c, complex_schur, condition_estimate, fix_phase, frobenius, hermitian_eigen, inverse, null_space,
    reorder_schur, sandwich, CMatrix, CVector, C64,
};
use crate::model::HamiltonianBlocks;

/// `||beta| - 1|` below which a state counts as propagating.
pub const TAU_PROP: f64 = 1e-6;
/// Propagating states slower than this sit on a band edge.
pub const BAND_EDGE_VELOCITY: f64 = 1e-12;
/// Chordal distance below which two Bloch factors are treated as degenerate.
const CLUSTER_TOL: f64 = 1e-7;

const SHIFTS: [(f64, f64); 3] = [(0.273, 0.379), (-0.611, 0.157), (0.19, -0.71)];

/// Shift-and-invert Schur form of the transfer pencil at complex energy `z`.
pub(crate) struct Pencil {
    h00: CMatrix,
    v: CMatrix,
    z: C64,
    shift: C64,
    q: CMatrix,
    t: CMatrix,
    theta_scale: f64,
}

impl Pencil {
    pub(crate) fn new(h00: &CMatrix, v: &CMatrix, z: C64) -> Result<Self> {
        let n = h00.nrows();
        let mut a = CMatrix::zeros(2 * n, 2 * n);
        let mut b = CMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            a[(i, n + i)] = c(1.0, 0.0);
            b[(i, i)] = c(1.0, 0.0);
        }
        a.view_mut((n, 0), (n, n)).copy_from(&(-v.adjoint()));
        a.view_mut((n, n), (n, n))
            .copy_from(&(CMatrix::from_diagonal_element(n, n, z) - h00));
        b.view_mut((n, n), (n, n)).copy_from(v);

        let mut worst = f64::INFINITY;
        for (re, im) in SHIFTS {
            let shift = c(re, im);
            let shifted = &a - &b * shift;
            let cond = condition_estimate(&shifted);
            if !(cond < 1e12) {
                worst = worst.min(cond);
                continue;
            }
            let m = inverse(&shifted, "shifted pencil")? * &b;
            let (q, t) = complex_schur(&m)?;
            let theta_scale = (0..t.nrows()).fold(0.0_f64, |acc, i| acc.max(t[(i, i)].norm()));
            return Ok(Pencil {
                h00: h00.clone(),
                v: v.clone(),
                z,
                shift,
                q,
                t,
                theta_scale,
            });
        }
        Err(Error::IllConditionedPencil {
            message: "every trial shift is close to a Bloch factor".into(),
            condition: worst,
        })
    }

    fn n(&self) -> usize {
        self.h00.nrows()
    }

    /// Bloch factor for a Schur eigenvalue `theta = 1 / (beta - shift)`.
    /// Vanishing `theta` (singular `v`) maps to an infinite factor.
    fn beta(&self, theta: C64) -> C64 {
        if theta.norm() <= 1e-13 * self.theta_scale {
            return c(f64::INFINITY, 0.0);
        }
        (1.0 + self.shift * theta) / theta
    }

    fn thetas(&self) -> Vec<C64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }

    /// Transfer matrix `F` with `psi_{m+1} = F psi_m` over the retarded
    /// solutions: decaying ones, plus outgoing ones on the unit circle.
    pub(crate) fn retarded_transfer(self) -> Result<CMatrix> {
        let n = self.n();
        let selected: Vec<bool> = self.thetas().iter().map(|&th| self.is_retarded(th)).collect();
        let count = selected.iter().filter(|&&s| s).count();
        if count != n {
            return Err(Error::IllConditionedPencil {
                message: format!("{count} retarded Bloch factors for a layer of dimension {n}"),
                condition: f64::INFINITY,
            });
        }
        let diag = self.thetas();
        let Pencil { mut q, mut t, .. } = self;
        let placed = reorder_schur(&mut q, &mut t, |th| {
            let nearest = (0..diag.len())
                .min_by(|&a, &b| (diag[a] - th).norm().total_cmp(&(diag[b] - th).norm()))
                .unwrap();
            selected[nearest]
        });
        if placed != n {
            return Err(Error::IllConditionedPencil {
                message: "Schur reordering lost track of the retarded subspace".into(),
                condition: f64::INFINITY,
            });
        }
        let z11 = q.view((0, 0), (n, n)).into_owned();
        let z21 = q.view((n, 0), (n, n)).into_owned();
        Ok(z21 * inverse(&z11, "retarded invariant subspace")?)
    }

    fn is_retarded(&self, theta: C64) -> bool {
        let beta = self.beta(theta);
        let r = beta.norm();
        if r < 1.0 - TAU_PROP {
            true
        } else if r > 1.0 + TAU_PROP {
            false
        } else {
            let (phi, _) = null_vectors(&self.h00, &self.v, self.z, beta, 1);
            velocity(&self.v, beta, &phi.column(0).into_owned()) > 0.0
        }
    }
}

/// Quadratic form scaled to stay bounded: `beta (z - h00) - beta^2 v - v^H`
/// for `|beta| <= 1`, and the `mu = 1 / beta` mirror image otherwise.
fn scaled_quadratic(h00: &CMatrix, v: &CMatrix, z: C64, beta: C64) -> CMatrix {
    let n = h00.nrows();
    let zh = CMatrix::from_diagonal_element(n, n, z) - h00;
    if beta.norm() <= 1.0 {
        zh * beta - v * (beta * beta) - v.adjoint()
    } else {
        let mu = if beta.is_finite() { 1.0 / beta } else { c(0.0, 0.0) };
        zh * mu - v - v.adjoint() * (mu * mu)
    }
}

fn null_vectors(h00: &CMatrix, v: &CMatrix, z: C64, beta: C64, dim: usize) -> (CMatrix, Vec<f64>) {
    null_space(&scaled_quadratic(h00, v, z, beta), dim)
}

/// Group velocity `-2 Im(beta phi^H v phi) / phi^H phi`, positive for
/// motion into the lead.
fn velocity(v: &CMatrix, beta: C64, phi: &CVector) -> f64 {
    -2.0 * (beta * sandwich(phi, v, phi)).im / phi.norm_squared()
}

fn chordal(a: C64, b: C64) -> f64 {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => (a - b).norm() / ((1.0 + a.norm_sqr()).sqrt() * (1.0 + b.norm_sqr()).sqrt()),
        (true, false) => 1.0 / (1.0 + a.norm_sqr()).sqrt(),
        (false, true) => 1.0 / (1.0 + b.norm_sqr()).sqrt(),
        (false, false) => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Propagating away from the interface, into the lead.
    Outgoing,
    /// Propagating toward the interface.
    Incoming,
    /// `|beta| < 1`.
    Decaying,
    /// `|beta| > 1`, including `beta = infinity` for singular couplings.
    Growing,
}

#[derive(Debug, Clone)]
pub struct BlochState {
    pub beta: C64,
    /// Unit-norm, phase-fixed cell amplitude on the surface layer.
    pub phi: CVector,
    pub propagating: bool,
    /// Group velocity for propagating states, zero otherwise.
    pub velocity: f64,
    pub direction: Direction,
    /// Propagating with `|velocity| < 1e-12`.
    pub band_edge: bool,
    /// Residual of the quadratic form multiplied through by `beta` (or `1 / beta`
    /// when `|beta| > 1`), which stays finite for zero and infinite factors.
    pub residual: f64,
}

impl BlochState {
    pub fn is_outgoing(&self) -> bool {
        self.direction == Direction::Outgoing
    }
}

#[derive(Debug, Clone)]
pub struct BlochSpectrum {
    pub states: Vec<BlochState>,
    pub energy: f64,
    pub side: Side,
    pub k: Option<f64>,
}

impl BlochSpectrum {
    pub fn outgoing(&self) -> Vec<&BlochState> {
        self.states.iter().filter(|s| s.is_outgoing()).collect()
    }

    pub fn n_outgoing(&self) -> usize {
        self.outgoing().len()
    }

    /// Unit-norm outgoing amplitudes as columns.
    pub fn outgoing_matrix(&self) -> CMatrix {
        let out = self.outgoing();
        let n = self.states.first().map_or(0, |s| s.phi.len());
        let mut m = CMatrix::zeros(n, out.len());
        for (j, s) in out.iter().enumerate() {
            m.set_column(j, &s.phi);
        }
        m
    }

    /// Outgoing amplitudes rescaled to unit flux through `im_sigma`.
    pub fn unit_flux_outgoing(&self, im_sigma: &ImSigma) -> Result<CMatrix> {
        let mut m = self.outgoing_matrix();
        for j in 0..m.ncols() {
            let col: CVector = m.column(j).into_owned();
            let f = flux(&col, im_sigma);
            if !(f > 0.0) {
                return Err(Error::Invalid(format!(
                    "outgoing Bloch state {j} carries flux {f:e} through the interface"
                )));
            }
            m.set_column(j, &col.unscale(f.sqrt()));
        }
        Ok(m)
    }
}

/// All `2n` Bloch solutions of the lead on `side` at real energy `e`.
pub fn bloch_states(blocks: &HamiltonianBlocks, side: Side, e: f64) -> Result<BlochSpectrum> {
    let n = blocks.n();
    let v = side.into_bulk(blocks);
    let z = c(e, 0.0);
    let pencil = Pencil::new(&blocks.h00, &v, z)?;
    let betas: Vec<C64> = pencil.thetas().into_iter().map(|th| pencil.beta(th)).collect();

    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut assigned = vec![false; betas.len()];
    for i in 0..betas.len() {
        if assigned[i] {
            continue;
        }
        let mut members = vec![i];
        assigned[i] = true;
        for j in (i + 1)..betas.len() {
            if !assigned[j] && members.iter().any(|&m| chordal(betas[m], betas[j]) < CLUSTER_TOL) {
                members.push(j);
                assigned[j] = true;
            }
        }
        clusters.push(members);
    }

    let mut states = Vec::with_capacity(2 * n);
    for members in clusters {
        let m = members.len();
        let beta = cluster_center(&members.iter().map(|&i| betas[i]).collect::<Vec<_>>());
        let (mut phis, _) = null_vectors(&blocks.h00, &v, z, beta, m);
        let propagating = (beta.norm() - 1.0).abs() < TAU_PROP;
        let mut velocities = vec![0.0; m];
        if propagating {
            // Diagonalise the flux form inside the degenerate subspace.
            let mut form = CMatrix::zeros(m, m);
            for a in 0..m {
                for b in 0..m {
                    let pa: CVector = phis.column(a).into_owned();
                    let pb: CVector = phis.column(b).into_owned();
                    form[(a, b)] = linalg::I
                        * (beta * sandwich(&pa, &v, &pb) - beta.conj() * sandwich(&pa, &v.adjoint(), &pb));
                }
            }
            let eig = hermitian_eigen(&form);
            phis = &phis * &eig.vectors;
            velocities = eig.values;
        }
        let scaled = scaled_quadratic(&blocks.h00, &v, z, beta);
        for (j, &vel) in velocities.iter().enumerate() {
            let mut phi: CVector = phis.column(j).into_owned();
            let norm = phi.norm();
            phi.unscale_mut(norm);
            fix_phase(&mut phi);
            let residual = (&scaled * &phi).norm();
            let direction = if propagating {
                if vel > 0.0 {
                    Direction::Outgoing
                } else {
                    Direction::Incoming
                }
            } else if beta.norm() < 1.0 {
                Direction::Decaying
            } else {
                Direction::Growing
            };
            states.push(BlochState {
                beta,
                phi,
                propagating,
                velocity: if propagating { vel } else { 0.0 },
                direction,
                band_edge: propagating && vel.abs() < BAND_EDGE_VELOCITY,
                residual,
            });
        }
    }
    states.sort_by(|a, b| {
        let key = |s: &BlochState| (s.beta.norm(), s.beta.arg(), -s.velocity);
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(ka.2.total_cmp(&kb.2))
    });
    Ok(BlochSpectrum {
        states,
        energy: e,
        side,
        k: blocks.k,
    })
}

fn cluster_center(betas: &[C64]) -> C64 {
    if betas.iter().any(|b| !b.is_finite()) {
        return c(f64::INFINITY, 0.0);
    }
    let inside = betas[0].norm() <= 1.0;
    let sum: C64 = betas
        .iter()
        .map(|&b| if inside { b } else { 1.0 / b })
        .sum();
    let mean = sum / betas.len() as f64;
    if inside {
        mean
    } else {
        1.0 / mean
    }
}

/// Unscaled residual `|(E - h00 - beta v - beta^-1 v^H) phi|` of a finite,
/// nonzero Bloch factor.
pub fn bloch_residual(blocks: &HamiltonianBlocks, side: Side, e: f64, state: &BlochState) -> f64 {
    let n = blocks.n();
    let v = side.into_bulk(blocks);
    let beta = state.beta;
    let m = CMatrix::from_diagonal_element(n, n, c(e, 0.0)) - &blocks.h00 - &v * beta - v.adjoint() / beta;
    (m * &state.phi).norm()
}

/// `F_ij = phi_i^H Sigma~ phi_j` for the columns of `phis`.
pub fn bloch_flux_matrix(phis: &CMatrix, im_sigma: &ImSigma) -> CMatrix {
    phis.adjoint() * &im_sigma.matrix * phis
}

/// Surface overlap `O_ij = phi_i^H phi_j`, stored exactly Hermitian.
pub fn surface_overlap(phis: &CMatrix) -> CMatrix {
    let raw = phis.adjoint() * phis;
    let m = raw.nrows();
    let mut o = CMatrix::zeros(m, m);
    for i in 0..m {
        o[(i, i)] = c(raw[(i, i)].re, 0.0);
        for j in (i + 1)..m {
            o[(i, j)] = raw[(i, j)];
            o[(j, i)] = raw[(i, j)].conj();
        }
    }
    o
}

#[derive(Debug, Clone)]
pub struct ChannelTransform {
    /// Rows: outgoing Bloch states; columns: open channels.
    pub a: CMatrix,
    /// `max(|a^H a - 1|_F, |a a^H - 1|_F)`
    pub unitarity_residual: f64,
}

/// Expansion coefficients of unit-flux outgoing Bloch states over unit-flux
/// open channels, `a_im = -2 u_m^H Sigma~ phi_i = -2 lambda_m u_m^H phi_i`.
pub fn channel_transform(bloch_open: &CMatrix, channels: &ChannelBasis) -> Result<ChannelTransform> {
    let n_open = channels.n_open();
    if bloch_open.ncols() != n_open {
        return Err(Error::OpenCountMismatch {
            bloch: bloch_open.ncols(),
            channels: n_open,
            tau_prop: TAU_PROP,
            tau_open: channels.tau_open,
        });
    }
    let u = channels.unit_flux_open();
    let lambdas = channels.open_lambdas();
    let mut a = CMatrix::zeros(n_open, n_open);
    for i in 0..n_open {
        let phi: CVector = bloch_open.column(i).into_owned();
        for (m, &lambda) in lambdas.iter().enumerate() {
            a[(i, m)] = -2.0 * lambda * u.column(m).dotc(&phi);
        }
    }
    let id = CMatrix::identity(n_open, n_open);
    let unitarity_residual = frobenius(&(a.adjoint() * &a - &id)).max(frobenius(&(&a * a.adjoint() - &id)));
    Ok(ChannelTransform { a, unitarity_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LatticeSpec, Preset};

    fn chain() -> HamiltonianBlocks {
        LatticeSpec::preset(Preset::Chain, &[]).unwrap().blocks(None).unwrap()
    }

    #[test]
    fn chain_band_center_states() {
        for side in [Side::Left, Side::Right] {
            let s = bloch_states(&chain(), side, 0.0).unwrap();
            assert_eq!(s.states.len(), 2);
            let out = s.outgoing();
            assert_eq!(out.len(), 1);
            assert!((out[0].beta - c(0.0, 1.0)).norm() < 1e-12);
            assert!((out[0].velocity - 2.0).abs() < 1e-12);
            let back: Vec<_> = s.states.iter().filter(|s| s.direction == Direction::Incoming).collect();
            assert!((back[0].velocity + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_outside_band() {
        let s = bloch_states(&chain(), Side::Right, 3.0).unwrap();
        assert_eq!(s.n_outgoing(), 0);
        let decaying: Vec<_> = s.states.iter().filter(|s| s.direction == Direction::Decaying).collect();
        assert_eq!(decaying.len(), 1);
        assert!((decaying[0].beta.norm() - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!(s.states.iter().any(|s| s.direction == Direction::Growing));
    }

    #[test]
    fn singular_coupling_gives_infinite_and_zero_factors() {
        let b = LatticeSpec::preset(Preset::DimerChain, &[("t1", 1.5), ("t2", 0.5)])
            .unwrap()
            .blocks(None)
            .unwrap();
        let s = bloch_states(&b, Side::Right, 0.3).unwrap();
        assert_eq!(s.states.len(), 4);
        assert!(s.states.iter().any(|s| !s.beta.is_finite()));
        assert!(s.states.iter().all(|s| s.residual < 1e-9));
    }

    #[test]
    fn overlap_is_exactly_hermitian() {
        let phis = CMatrix::from_row_slice(2, 2, &[c(0.3, 0.1), c(0.2, -0.5), c(-0.7, 0.2), c(0.1, 0.4)]);
        let o = surface_overlap(&phis);
        assert_eq!(o, o.adjoint());
    }
}
