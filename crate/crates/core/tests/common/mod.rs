//! Shared fixtures for the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

use embedding_channels::linalg::{c, CMatrix};
use embedding_channels::model::{HamiltonianBlocks, LatticeSpec, Model, Preset, Termination};
use rand::Rng;

pub fn model_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name)
}

pub fn load_model(name: &str) -> Model {
    let text = std::fs::read_to_string(model_path(name)).unwrap();
    Model::parse(&text).unwrap()
}

pub fn chain() -> LatticeSpec {
    LatticeSpec::preset(Preset::Chain, &[]).unwrap()
}

/// A lead drawn from every preset family plus dense complex blocks, together
/// with the transverse momentum it was evaluated at.
pub fn random_lead(rng: &mut impl Rng) -> (String, HamiltonianBlocks) {
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    match (u(0.0, 5.0)) as usize {
        0 => {
            let (t, eps) = (u(0.5, 1.5), u(-0.5, 0.5));
            let lead = LatticeSpec::preset(Preset::Chain, &[("t", t), ("eps", eps)]).unwrap();
            (format!("chain t={t:.3} eps={eps:.3}"), lead.blocks(None).unwrap())
        }
        1 => {
            let (t1, t2, ea, eb) = (u(0.3, 1.5), u(0.3, 1.5), u(-0.5, 0.5), u(-0.5, 0.5));
            let term = if u(0.0, 1.0) < 0.5 { Termination::A } else { Termination::B };
            let lead = LatticeSpec::preset(Preset::DimerChain, &[("t1", t1), ("t2", t2), ("eps_a", ea), ("eps_b", eb)])
                .unwrap()
                .with_termination(term);
            (format!("dimer t1={t1:.3} t2={t2:.3} {term:?}"), lead.blocks(None).unwrap())
        }
        2 => {
            let (t, tp, td, eps) = (u(0.5, 1.5), u(0.1, 1.5), u(0.0, 0.5), u(-0.5, 0.5));
            let lead =
                LatticeSpec::preset(Preset::Ladder, &[("t", t), ("t_perp", tp), ("t_diag", td), ("eps", eps)]).unwrap();
            (format!("ladder t_perp={tp:.3} t_diag={td:.3}"), lead.blocks(None).unwrap())
        }
        3 => {
            let width = u(2.0, 5.0) as usize;
            let periodic = u(0.0, 1.0) < 0.5;
            let lead = LatticeSpec::preset(Preset::SquareStrip, &[("t", u(0.5, 1.5)), ("width", width as f64)])
                .unwrap()
                .with_transverse(width, periodic)
                .unwrap();
            let ks = lead.k_points();
            let k = (!ks.is_empty()).then(|| ks[u(0.0, ks.len() as f64) as usize]);
            (format!("strip width={width} k={k:?}"), lead.blocks(k).unwrap())
        }
        _ => {
            let n = u(1.0, 4.0) as usize;
            let h00 = CMatrix::from_fn(n, n, |_, _| c(u(-1.0, 1.0), u(-1.0, 1.0)));
            let h00 = (&h00 + h00.adjoint()).scale(0.5);
            let h01 = CMatrix::from_fn(n, n, |_, _| c(u(-1.0, 1.0), u(-1.0, 1.0)));
            ("dense".into(), HamiltonianBlocks::new(h00, h01).unwrap())
        }
    }
}

/// Energy drawn from the band range widened by one on each side.
pub fn random_energy(rng: &mut impl Rng, blocks: &HamiltonianBlocks) -> f64 {
    let (lo, hi) = blocks.band_range(65);
    rng.random_range(lo - 1.0..hi + 1.0)
}
