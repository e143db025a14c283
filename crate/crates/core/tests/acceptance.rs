//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned
//! below. The report goes to stderr directly, so it shows without `--nocapture`.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use embedding_channels::bloch::{bloch_flux_matrix, bloch_states, channel_transform, surface_overlap};
use embedding_channels::channels::{bond_current, channel_decomposition, default_tau_open, flux};
use embedding_channels::embed::{embedding_potential, Side, ETA_SWEEP};
use embedding_channels::linalg::{c, CMatrix, CVector, C64};
use embedding_channels::model::{DeviceConfig, HamiltonianBlocks, LatticeSpec, Model, Preset, Termination};
use embedding_channels::spectra::cli::ETA_TRANSPORT;
use embedding_channels::spectra::edge::{edge_grid, fit_band_edge, EdgeSide};
use embedding_channels::spectra::peaks::detect_peaks;
use embedding_channels::spectra::{analyze_point, energy_grid, sweep};
use embedding_channels::transport::{right_flux, scattered_wave};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0x5eed_2026;

const PSD_TOL: f64 = 1e-10;
const PSD_DRAWS: usize = 500;
const PSD_BUDGET: Duration = Duration::from_secs(10);
const FLUX_LAW_TOL: f64 = 1e-10;
const BOND_CURRENT_TOL: f64 = 1e-8;
const COUNT_POINTS: usize = 200;
const UNITARITY_TOL: f64 = 1e-8;
const EQUIVALENCE_TOL: f64 = 1e-9;
const CHAIN_SWEEP_POINTS: usize = 500;
const LADDER_SWEEP_POINTS: usize = 200;
const SWEEP_BUDGET: Duration = Duration::from_secs(30);
const ORACLE_TOL: f64 = 1e-10;
const EXPONENT_TOL: f64 = 0.02;
const PEAK_RATIO: (f64, f64) = (9.0, 11.0);
const PEAK_TRANSMISSION_TOL: f64 = 1e-10;
const SCATTERED_TOL: f64 = 1e-8;
const OVERLAP_MIN: f64 = 0.01;
const FLUX_OFFDIAG_TOL: f64 = 1e-9;

/// Broadening for the strict-tolerance criteria. Leakage into closed
/// channels grows linearly with it and reaches `1e-8` near `1e-6`.
const ETA_STRICT: f64 = 1e-12;

struct Outcome {
    id: u32,
    title: &'static str,
    detail: String,
    pass: bool,
}

fn outcome(id: u32, title: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, title, detail, pass }
}

fn open_and_bloch(blocks: &HamiltonianBlocks, side: Side, e: f64, eta: f64) -> (usize, usize, Option<f64>, f64) {
    let sig = embedding_potential(blocks, side, e, eta).unwrap();
    let im = sig.im_sigma();
    let ch = channel_decomposition(&im, default_tau_open(eta));
    let spectrum = bloch_states(blocks, side, e).unwrap();
    let (mut unitarity, mut column) = (None, 0.0f64);
    if spectrum.n_outgoing() == ch.n_open() && ch.n_open() >= 2 {
        let u = spectrum.unit_flux_outgoing(&im).unwrap();
        let t = channel_transform(&u, &ch).unwrap();
        unitarity = Some(t.unitarity_residual);
        for m in 0..t.a.ncols() {
            let s: f64 = t.a.column(m).iter().map(|z| z.norm_sqr()).sum();
            column = column.max((s - 1.0).abs());
        }
    }
    (ch.n_open(), spectrum.n_outgoing(), unitarity, column)
}

fn criterion_1_and_2() -> (Outcome, Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let start = Instant::now();
    let (mut worst_psd, mut worst_flux) = (f64::NEG_INFINITY, 0.0f64);
    let mut eigenpairs = 0;
    for _ in 0..PSD_DRAWS {
        let (_, blocks) = common::random_lead(&mut rng);
        let e = common::random_energy(&mut rng, &blocks);
        for side in [Side::Left, Side::Right] {
            let im = embedding_potential(&blocks, side, e, ETA_SWEEP).unwrap().im_sigma();
            worst_psd = worst_psd.max(im.max_eigenvalue());
            let ch = channel_decomposition(&im, default_tau_open(ETA_SWEEP));
            for i in 0..ch.n() {
                worst_flux = worst_flux.max((flux(&ch.unit_norm(i), &im) + 2.0 * ch.lambdas[i]).abs());
                eigenpairs += 1;
            }
        }
    }
    let elapsed = start.elapsed();

    // Bond current of outgoing Bloch states in one-dimensional leads.
    let leads = [
        LatticeSpec::preset(Preset::Chain, &[]).unwrap(),
        LatticeSpec::preset(Preset::DimerChain, &[("t1", 1.5), ("t2", 0.5)]).unwrap(),
        LatticeSpec::preset(Preset::DimerChain, &[("t1", 1.0), ("t2", 1.0), ("eps_a", 0.5), ("eps_b", -0.5)])
            .unwrap()
            .with_termination(Termination::B),
    ];
    let mut worst_bond = 0.0f64;
    let mut states = 0;
    for lead in &leads {
        let blocks = lead.blocks(None).unwrap();
        for e in [-1.9, -1.3, -0.7, 0.6, 1.1, 1.8] {
            let im = embedding_potential(&blocks, Side::Right, e, ETA_STRICT).unwrap().im_sigma();
            let spectrum = bloch_states(&blocks, Side::Right, e).unwrap();
            for s in spectrum.outgoing() {
                let next = s.phi.map(|z| z * s.beta);
                let current = bond_current(&s.phi, &next, &blocks.h01);
                worst_bond = worst_bond.max((current - flux(&s.phi, &im)).abs());
                states += 1;
            }
        }
    }
    let c1 = outcome(
        1,
        "Im Sigma negative semi-definite",
        worst_psd <= PSD_TOL && elapsed < PSD_BUDGET,
        format!(
            "{PSD_DRAWS} draws x 2 sides, max eigenvalue {worst_psd:.3e} (tol {PSD_TOL:e}), {:.2} s (budget {} s)",
            elapsed.as_secs_f64(),
            PSD_BUDGET.as_secs()
        ),
    );
    let c2 = outcome(
        2,
        "flux law and bond current",
        worst_flux <= FLUX_LAW_TOL && worst_bond <= BOND_CURRENT_TOL && states > 0,
        format!(
            "{eigenpairs} eigenpairs, max |flux + 2 lambda| {worst_flux:.3e} (tol {FLUX_LAW_TOL:e}); \
             {states} Bloch states, max |J - flux| {worst_bond:.3e} (tol {BOND_CURRENT_TOL:e})"
        ),
    );
    (c1, c2)
}

/// Leads of the bundled models, paired with the transverse momentum.
fn counting_leads() -> Vec<(String, HamiltonianBlocks)> {
    let mut out = Vec::new();
    for name in ["impurity_chain.json", "ladder.json", "asymmetric_ladder.json", "ionic_chain.json", "square_strip.json"] {
        let model = common::load_model(name);
        for k in model.k_points() {
            for side in [Side::Left, Side::Right] {
                out.push((format!("{name} {side:?} k={k:?}"), model.lead(side).blocks(k).unwrap()));
            }
        }
    }
    let dimer = LatticeSpec::preset(Preset::DimerChain, &[("t1", 1.5), ("t2", 0.5)]).unwrap();
    out.push(("dimer A".into(), dimer.blocks(None).unwrap()));
    out
}

fn criterion_3_and_4() -> (Outcome, Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let leads = counting_leads();
    let mut mismatches = Vec::new();
    let (mut multi, mut worst_unit, mut worst_col) = (0, 0.0f64, 0.0f64);
    for _ in 0..COUNT_POINTS {
        let (name, blocks) = &leads[rng.random_range(0..leads.len())];
        let e = common::random_energy(&mut rng, blocks);
        let side = if rng.random_bool(0.5) { Side::Left } else { Side::Right };
        let (open, out, unitarity, column) = open_and_bloch(blocks, side, e, ETA_STRICT);
        if open != out {
            mismatches.push(format!("{name} {side:?} E={e}: open {open}, outgoing {out}"));
        }
        if let Some(u) = unitarity {
            multi += 1;
            worst_unit = worst_unit.max(u);
            worst_col = worst_col.max(column);
        }
    }
    let c3 = outcome(
        3,
        "open channels = outgoing Bloch states",
        mismatches.is_empty(),
        format!("{COUNT_POINTS} points, {} mismatches {:?}", mismatches.len(), mismatches),
    );
    let c4 = outcome(
        4,
        "channel transform unitary",
        multi > 0 && worst_unit <= UNITARITY_TOL && worst_col <= UNITARITY_TOL,
        format!(
            "{multi} points with >= 2 open channels, max |a^H a - 1| {worst_unit:.3e}, \
             max |sum_i |a_im|^2 - 1| {worst_col:.3e} (tol {UNITARITY_TOL:e})"
        ),
    );
    (c3, c4)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for (name, npts) in [("impurity_chain.json", CHAIN_SWEEP_POINTS), ("ladder.json", LADDER_SWEEP_POINTS)] {
        let model = common::load_model(name);
        let grid = energy_grid(-3.5, 3.5, npts).unwrap();
        let result = sweep(&model, &grid, ETA_TRANSPORT, &model.k_points()).unwrap();
        failures += result.failures();
        for r in result.records.iter().filter(|r| r.is_ok()) {
            worst = worst.max(r.discrepancy);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        5,
        "channel-sum and trace transmission agree",
        failures == 0 && worst <= EQUIVALENCE_TOL && elapsed < SWEEP_BUDGET,
        format!(
            "{CHAIN_SWEEP_POINTS}-point chain + {LADDER_SWEEP_POINTS}-point ladder, max discrepancy {worst:.3e} \
             (tol {EQUIVALENCE_TOL:e}), {failures} failed points, {:.2} s (budget {} s)",
            elapsed.as_secs_f64(),
            SWEEP_BUDGET.as_secs()
        ),
    )
}

fn criterion_6() -> Outcome {
    let impurity = common::load_model("impurity_chain.json");
    let t_imp = analyze_point(&impurity, 0.0, None, ETA_TRANSPORT).unwrap().transmission.total_trace;
    let perfect = Model::new(common::chain(), common::chain(), DeviceConfig::Segment { layers: 3, impurity: 0.0, site: 0 }).unwrap();
    let mut worst = 0.0f64;
    for e in [-1.9, -1.2, -0.4, 0.0, 0.3, 1.0, 1.7] {
        let t = analyze_point(&perfect, e, None, ETA_TRANSPORT).unwrap().transmission.total_trace;
        worst = worst.max((t - 1.0).abs());
    }
    outcome(
        6,
        "closed-form transmissions",
        (t_imp - 0.8).abs() <= ORACLE_TOL && worst <= ORACLE_TOL,
        format!("impurity T(0) = {t_imp:.15} (0.8), perfect chain max |T - 1| {worst:.3e} (tol {ORACLE_TOL:e})"),
    )
}

fn edge_exponent(model: &Model, lead: Side, e0: f64, side: EdgeSide) -> f64 {
    let window = (1e-4, 1e-2);
    let grid = edge_grid(e0, window, 40, Some(side)).unwrap();
    let result = sweep(model, &grid, ETA_SWEEP, &model.k_points()).unwrap();
    fit_band_edge(&result, lead, e0, window, Some(side)).unwrap().exponent
}

fn criterion_7() -> Outcome {
    let chain = common::load_model("impurity_chain.json");
    let chain_exp = edge_exponent(&chain, Side::Left, 2.0, EdgeSide::Below);
    // Two-site chain with equal bonds and a site-energy gap [-0.5, 0.5].
    let ionic = |term: Termination| {
        let lead = LatticeSpec::preset(Preset::DimerChain, &[("t1", 1.0), ("t2", 1.0), ("eps_a", 0.5), ("eps_b", -0.5)])
            .unwrap()
            .with_termination(term);
        Model::new(lead.clone(), lead, DeviceConfig::Segment { layers: 1, impurity: 0.0, site: 0 }).unwrap()
    };
    let exp_a = edge_exponent(&ionic(Termination::A), Side::Left, 0.5, EdgeSide::Above);
    let exp_b = edge_exponent(&ionic(Termination::B), Side::Left, 0.5, EdgeSide::Above);
    let (lo, hi) = if exp_a < exp_b { (exp_a, exp_b) } else { (exp_b, exp_a) };
    outcome(
        7,
        "band-edge exponents",
        (chain_exp - 0.5).abs() <= EXPONENT_TOL && (lo + 0.5).abs() <= EXPONENT_TOL && (hi - 0.5).abs() <= EXPONENT_TOL,
        format!(
            "chain {chain_exp:.4}; two-site chain edge E0 = 0.5, left lead: termination A {exp_a:.4}, B {exp_b:.4} \
             (expected +-0.5 within {EXPONENT_TOL})"
        ),
    )
}

fn criterion_8() -> Outcome {
    let model = common::load_model("dimer_surface_state.json");
    let grid = energy_grid(-0.2, 0.2, 201).unwrap();
    let report = detect_peaks(&model, &grid, &[1e-6, 1e-5], Side::Right, None).unwrap();
    let ratio = report.scaling.first().map_or(f64::NAN, |s| s.ratio);
    let t_max = report.peaks.iter().map(|p| p.transmission.abs()).fold(0.0, f64::max);
    let pass = report.scaling.len() == 1
        && (PEAK_RATIO.0..=PEAK_RATIO.1).contains(&ratio)
        && !report.peaks.is_empty()
        && t_max < PEAK_TRANSMISSION_TOL;
    let at = report.peaks.first().map_or(f64::NAN, |p| p.energy);
    outcome(
        8,
        "surface-state peak scaling",
        pass,
        format!(
            "{} peaks near E = {at:.3e}, height ratio {ratio:.6} (in [{}, {}]), max T at peak {t_max:.3e} (tol {PEAK_TRANSMISSION_TOL:e})",
            report.peaks.len(),
            PEAK_RATIO.0,
            PEAK_RATIO.1
        ),
    )
}

/// Scattered wave at the impurity of a long chain with complex absorbing
/// potentials at both ends, for a unit plane wave `e^{iqx}` incident from
/// the left.
fn absorbing_chain_oracle(e: f64, impurity: f64) -> C64 {
    const N: usize = 4000;
    const RAMP: usize = 1500;
    const W0: f64 = 1.0;
    const POWER: i32 = 4;
    let centre = N / 2;
    let q = (-e / 2.0).acos();
    let x = |i: usize| i as f64 - centre as f64;
    // (E - H + i W) psi_sc = V psi_inc with nearest-neighbour hopping -1.
    let inner = (N / 2 - RAMP) as f64;
    let diag: Vec<C64> = (0..N)
        .map(|i| {
            let d = x(i).abs() - inner;
            let w = if d > 0.0 { W0 * (d / RAMP as f64).powi(POWER) } else { 0.0 };
            let v = if i == centre { impurity } else { 0.0 };
            c(e - v, w)
        })
        .collect();
    let mut rhs = vec![c(0.0, 0.0); N];
    rhs[centre] = C64::from_polar(impurity, 0.0);
    let sc = solve_tridiagonal(&diag, c(1.0, 0.0), &rhs);
    C64::from_polar(1.0, q * x(centre)) + sc[centre]
}

/// Thomas algorithm for a tridiagonal system with constant off-diagonals.
fn solve_tridiagonal(diag: &[C64], off: C64, rhs: &[C64]) -> Vec<C64> {
    let n = diag.len();
    let mut cp = vec![c(0.0, 0.0); n];
    let mut dp = vec![c(0.0, 0.0); n];
    cp[0] = off / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - off * cp[i - 1];
        cp[i] = off / m;
        dp[i] = (rhs[i] - off * dp[i - 1]) / m;
    }
    let mut x = vec![c(0.0, 0.0); n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

fn criterion_9() -> Outcome {
    let mut worst_route = 0.0f64;
    let mut cases = 0;
    for name in ["impurity_chain.json", "ladder.json", "asymmetric_ladder.json"] {
        let model = common::load_model(name);
        for e in [-1.6, -0.45, 0.0, 0.35, 1.2] {
            let a = analyze_point(&model, e, None, ETA_STRICT).unwrap();
            let u = a.channels_l.unit_flux_open();
            for i in 0..u.ncols() {
                let psi: CVector = u.column(i).into_owned();
                let chi = scattered_wave(&a.green, &a.im_l, &psi).unwrap();
                let t_flux = right_flux(&a.green, &a.im_r, &chi);
                let t_row: f64 = a.transmission.t_squared[i].iter().sum();
                worst_route = worst_route.max((t_flux - t_row).abs());
                cases += 1;
            }
        }
    }

    let model = common::load_model("impurity_chain.json");
    let mut worst_oracle = 0.0f64;
    for e in [0.0, 0.5, -1.1] {
        let a = analyze_point(&model, e, None, ETA_STRICT).unwrap();
        let chi = scattered_wave(&a.green, &a.im_l, &CVector::from_element(1, c(1.0, 0.0))).unwrap();
        worst_oracle = worst_oracle.max((chi[0] - absorbing_chain_oracle(e, 1.0)).norm());
    }
    outcome(
        9,
        "scattered-wave formula",
        cases > 0 && worst_route <= SCATTERED_TOL && worst_oracle <= SCATTERED_TOL,
        format!(
            "{cases} incident channels, max |T_chi - sum_j |t_ij|^2| {worst_route:.3e}; \
             4000-site absorbing-chain oracle max |chi - chi_ref| {worst_oracle:.3e} (tol {SCATTERED_TOL:e})"
        ),
    )
}

fn criterion_10() -> Outcome {
    let model = common::load_model("asymmetric_ladder.json");
    let blocks = model.lead_right.blocks(None).unwrap();
    let (mut overlap, mut offdiag) = (0.0f64, 0.0f64);
    for e in [-1.2, -0.3, 0.4, 1.1] {
        let im = embedding_potential(&blocks, Side::Right, e, ETA_STRICT).unwrap().im_sigma();
        let spectrum = bloch_states(&blocks, Side::Right, e).unwrap();
        let u = spectrum.unit_flux_outgoing(&im).unwrap();
        if u.ncols() < 2 {
            continue;
        }
        let normed = CMatrix::from_columns(&u.column_iter().map(|col| col.normalize()).collect::<Vec<_>>());
        let o = surface_overlap(&normed);
        let f = bloch_flux_matrix(&u, &im);
        for i in 0..o.nrows() {
            for j in 0..o.ncols() {
                if i != j {
                    overlap = overlap.max(o[(i, j)].norm());
                    offdiag = offdiag.max(f[(i, j)].norm());
                }
            }
        }
    }
    outcome(
        10,
        "non-orthogonal Bloch surfaces, diagonal flux",
        overlap > OVERLAP_MIN && offdiag < FLUX_OFFDIAG_TOL,
        format!(
            "max |<phi_i|phi_j>| {overlap:.4} (> {OVERLAP_MIN}), max |F_ij| off-diagonal {offdiag:.3e} (< {FLUX_OFFDIAG_TOL:e})"
        ),
    )
}

#[test]
fn acceptance() {
    let (c1, c2) = criterion_1_and_2();
    let (c3, c4) = criterion_3_and_4();
    let outcomes = [c1, c2, c3, c4, criterion_5(), criterion_6(), criterion_7(), criterion_8(), criterion_9(), criterion_10()];
    // Written to the raw stderr handle so the report survives output capture.
    let mut err = std::io::stderr().lock();
    for o in &outcomes {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        writeln!(err, "{verdict} criterion {:2} {}: {}", o.id, o.title, o.detail).unwrap();
    }
    drop(err);
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
