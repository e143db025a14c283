mod common;

use embedding_channels::channels::{
    bond_current, channel_decomposition, default_tau_open, flux, reconstruct_im_sigma, ChannelBasis, Convention,
};
use embedding_channels::embed::{embedding_potential, ImSigma, Side, ETA_POINT};
use embedding_channels::linalg::{c, max_abs, CMatrix, CVector};
use embedding_channels::model::{HamiltonianBlocks, LatticeSpec, Preset};
use proptest::prelude::*;

fn basis(blocks: &HamiltonianBlocks, side: Side, e: f64, eta: f64) -> (ImSigma, ChannelBasis) {
    let im = embedding_potential(blocks, side, e, eta).unwrap().im_sigma();
    let ch = channel_decomposition(&im, default_tau_open(eta));
    (im, ch)
}

fn ladder(tp: f64, td: f64) -> HamiltonianBlocks {
    LatticeSpec::preset(Preset::Ladder, &[("t_perp", tp), ("t_diag", td)]).unwrap().blocks(None).unwrap()
}

#[test]
fn chain_channels() {
    let chain = common::chain().blocks(None).unwrap();
    let (im, ch) = basis(&chain, Side::Left, 0.0, ETA_POINT);
    assert_eq!(ch.n_open(), 1);
    assert!((ch.lambdas[0] + 1.0).abs() < 1e-7);
    assert!((ch.unit_norm(0)[0] - c(1.0, 0.0)).norm() < 1e-12);
    assert!((flux(&ch.unit_norm(0), &im) - 2.0).abs() < 1e-7);
    assert!((flux(&ch.unit_flux(0).unwrap(), &im) - 1.0).abs() < 1e-12);
    for conv in [Convention::UnitNorm, Convention::UnitNormOpen, Convention::UnitFluxOpen] {
        assert!((reconstruct_im_sigma(&ch, conv)[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-7);
    }

    let (_, ch) = basis(&chain, Side::Left, 3.0, ETA_POINT);
    assert_eq!(ch.n_open(), 0);
}

#[test]
fn degenerate_ladder_channels_span_both_rung_modes() {
    let (im, ch) = basis(&ladder(0.5, 0.0), Side::Right, 0.0, 1e-12);
    assert_eq!(ch.n_open(), 2);
    let expected = -(3.75f64).sqrt() / 2.0;
    for &l in &ch.lambdas {
        assert!((l - expected).abs() < 1e-9, "lambda {l}");
    }
    // Compare projectors, never individual vectors of a degenerate pair.
    let mut proj = CMatrix::zeros(2, 2);
    for i in ch.open_indices() {
        let p = ch.unit_norm(i);
        proj += &p * p.adjoint();
    }
    assert!(max_abs(&(proj - CMatrix::identity(2, 2))) < 1e-12);
    for i in 0..ch.n() {
        assert!((flux(&ch.unit_flux(i).unwrap(), &im) - 1.0).abs() < 1e-10);
    }
}

#[test]
fn closed_channels_carry_no_flux() {
    // Antibonding rung mode at E = -2.2 is evanescent, bonding is open.
    let (im, ch) = basis(&ladder(0.5, 0.0), Side::Left, -2.2, 1e-12);
    assert_eq!(ch.n_open(), 1);
    let closed = (0..ch.n()).find(|i| !ch.open[*i]).unwrap();
    assert!(flux(&ch.unit_norm(closed), &im).abs() < 1e-10);
    assert!(ch.unit_flux(closed).is_err());
}

#[test]
fn chain_bond_current() {
    // Amplitude 1 at E = 0 moving right: psi_n = i^n, v = 2 sin(pi / 2).
    let h = CMatrix::from_element(1, 1, c(-1.0, 0.0));
    let j = bond_current(&CVector::from_element(1, c(1.0, 0.0)), &CVector::from_element(1, c(0.0, 1.0)), &h);
    assert!((j - 2.0).abs() < 1e-15);
    let s = 0.5f64.sqrt();
    let u = bond_current(&CVector::from_element(1, c(s, 0.0)), &CVector::from_element(1, c(0.0, s)), &h);
    assert!((u - 1.0).abs() < 1e-15);
}

/// Number of rung modes `E = -+t_perp - 2 cos k` whose band contains `e`.
fn ladder_modes(e: f64, tp: f64) -> usize {
    [-tp, tp].iter().filter(|&&m| (e - m).abs() < 2.0).count()
}

#[test]
fn open_count_is_a_step_function_of_energy() {
    let tp = 0.5;
    let blocks = ladder(tp, 0.0);
    let edges = [-2.5, -1.5, 1.5, 2.5];
    for i in 0..=400 {
        let e = -3.0 + 6.0 * i as f64 / 400.0;
        if edges.iter().any(|x| (e - x).abs() < 1e-6) {
            continue;
        }
        let (_, ch) = basis(&blocks, Side::Left, e, 1e-10);
        assert_eq!(ch.n_open(), ladder_modes(e, tp), "E = {e}");
    }
    let dimer = LatticeSpec::preset(Preset::DimerChain, &[("t1", 1.5), ("t2", 0.5)]).unwrap().blocks(None).unwrap();
    for i in 0..=400 {
        let e: f64 = -2.5 + 5.0 * i as f64 / 400.0;
        if [1.0, 2.0].iter().any(|x| (e.abs() - x).abs() < 1e-6) {
            continue;
        }
        let (_, ch) = basis(&dimer, Side::Right, e, 1e-10);
        let inside = (1.0..2.0).contains(&e.abs());
        assert_eq!(ch.n_open(), usize::from(inside), "E = {e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn eigenpairs_and_normalizations(tp in 0.0..1.5f64, td in 0.0..0.5f64, e in -3.5..3.5f64, left in any::<bool>()) {
        let side = if left { Side::Left } else { Side::Right };
        let (im, ch) = basis(&ladder(tp, td), side, e, 1e-12);
        let vectors = CMatrix::from_columns(&(0..ch.n()).map(|i| ch.unit_norm(i)).collect::<Vec<_>>());
        prop_assert!(max_abs(&(vectors.adjoint() * &vectors - CMatrix::identity(ch.n(), ch.n()))) <= 1e-12);
        for i in 0..ch.n() {
            let psi = ch.unit_norm(i);
            prop_assert!((&im.matrix * &psi - psi.scale(ch.lambdas[i])).norm() <= 1e-10);
            prop_assert!((flux(&psi, &im) + 2.0 * ch.lambdas[i]).abs() <= 1e-10);
        }
        for i in ch.open_indices() {
            prop_assert!((flux(&ch.unit_flux(i).unwrap(), &im) - 1.0).abs() <= 1e-10);
        }
        prop_assert!(ch.lambdas.windows(2).all(|w| w[0] <= w[1]));
        let recon = reconstruct_im_sigma(&ch, Convention::UnitNormOpen);
        prop_assert!(max_abs(&(recon - &im.matrix)) <= 1e-10);
    }

    #[test]
    fn flux_is_additive_over_open_channels(
        tp in 0.0..1.5f64, e in -2.4..2.4f64,
        re in proptest::collection::vec(-1.0..1.0f64, 2), imag in proptest::collection::vec(-1.0..1.0f64, 2),
    ) {
        let (im, ch) = basis(&ladder(tp, 0.1), Side::Left, e, 1e-12);
        let u = ch.unit_flux_open();
        let coeffs: Vec<_> = (0..u.ncols()).map(|i| c(re[i], imag[i])).collect();
        let psi = &u * CVector::from_vec(coeffs.clone());
        let expected: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((flux(&psi, &im) - expected).abs() <= 1e-10);
    }
}
