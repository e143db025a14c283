//! `embchan` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use super::edge::{edge_grid, fit_band_edge, EdgeSide};
use super::output::{channels_csv, fmt_float, matrix_json, transmit_csv, vector_json, write_atomic};
use super::peaks::detect_peaks;
use super::sweep::{analyze_point, energy_grid, sweep};
use super::validate::{validate_model, ETA_VALIDATE};
use crate::bloch::{bloch_states, Direction};
use crate::embed::{Side, ETA_SWEEP};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::transport::{right_flux, scattered_wave};

/// Broadening for transmission runs. The trace formula picks up closed
/// channels whose eigenvalues are of order `eta`, so it must be tiny for
/// the channel sum and the trace to agree to 1e-9.
pub const ETA_TRANSPORT: f64 = 1e-12;

#[derive(Parser, Debug)]
#[command(name = "embchan", version, about = "Embedding-potential channels and transmission of tight-binding leads")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Channel eigenvalues of one lead over an energy grid.
    Channels(SweepArgs),
    /// Bloch factors and velocities of one lead over an energy grid.
    Bloch(SweepArgs),
    /// Transmission by channel sum and by trace formula.
    Transmit(SweepArgs),
    /// Flux of the scattered wave for each incident open channel.
    Scatter(SweepArgs),
    /// Fit the power law of the largest channel eigenvalue at a band edge.
    FitEdge(EdgeArgs),
    /// Locate surface-state peaks and check their 1/eta scaling.
    Peaks(SweepArgs),
    /// Run all invariant checks at five sample energies.
    Validate(CommonArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LeadArg {
    Left,
    Right,
}

impl From<LeadArg> for Side {
    fn from(l: LeadArg) -> Side {
        match l {
            LeadArg::Left => Side::Left,
            LeadArg::Right => Side::Right,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EdgeSideArg {
    Above,
    Below,
    Auto,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Model configuration (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Imaginary part of the energy (repeatable for `peaks`).
    #[arg(long)]
    eta: Vec<f64>,
    /// Transverse momentum (repeatable); defaults to the model's K grid.
    #[arg(long = "k", allow_negative_numbers = true)]
    k: Vec<f64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Lead whose channels or Bloch states are reported.
    #[arg(long, value_enum, default_value = "left")]
    side: LeadArg,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, allow_negative_numbers = true)]
    emin: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    emax: Option<f64>,
    #[arg(long, default_value_t = 200)]
    npts: usize,
    /// Single energy instead of a grid.
    #[arg(long, allow_negative_numbers = true, conflicts_with_all = ["emin", "emax"])]
    energy: Option<f64>,
}

#[derive(Args, Debug)]
struct EdgeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Band-edge energy.
    #[arg(long, allow_negative_numbers = true)]
    e0: f64,
    #[arg(long, default_value_t = 1e-4)]
    dmin: f64,
    #[arg(long, default_value_t = 1e-2)]
    dmax: f64,
    /// Points per side of the edge.
    #[arg(long, default_value_t = 40)]
    npts: usize,
    #[arg(long = "edge-side", value_enum, default_value = "auto")]
    edge_side: EdgeSideArg,
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn load_model(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("cannot read model file {}: {e}", path.display())))?;
    Model::parse(&text)
}

fn single_eta(common: &CommonArgs, default: f64) -> Result<f64> {
    match common.eta.as_slice() {
        [] => Ok(default),
        [eta] if *eta > 0.0 && eta.is_finite() => Ok(*eta),
        [eta] => Err(Error::InvalidEta(*eta)),
        _ => Err(Error::InvalidParameter {
            name: "eta".into(),
            message: "only the peaks command accepts several values".into(),
        }),
    }
}

fn k_list(model: &Model, common: &CommonArgs) -> Result<Vec<Option<f64>>> {
    if common.k.is_empty() {
        return Ok(model.k_points());
    }
    if !model.is_periodic() {
        return Err(Error::UnexpectedMomentum);
    }
    Ok(common.k.iter().map(|&k| Some(k)).collect())
}

fn grid(model: &Model, args: &SweepArgs) -> Result<Vec<f64>> {
    if let Some(e) = args.energy {
        return Ok(vec![e]);
    }
    let (emin, emax) = match (args.emin, args.emax) {
        (Some(a), Some(b)) => (a, b),
        (a, b) => {
            let (lo, hi) = band_window(model)?;
            (a.unwrap_or(lo), b.unwrap_or(hi))
        }
    };
    energy_grid(emin, emax, args.npts)
}

/// Band range of both leads widened by 0.5 on each side.
fn band_window(model: &Model) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in model.k_points() {
        for lead in [&model.lead_left, &model.lead_right] {
            let (a, b) = lead.blocks(k)?.band_range(65);
            lo = lo.min(a);
            hi = hi.max(b);
        }
    }
    Ok((lo - 0.5, hi + 0.5))
}

fn emit(common: &CommonArgs, text: &str) -> Result<()> {
    match &common.out {
        Some(path) => write_atomic(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Channels(args) => {
            let model = load_model(&args.common.model)?;
            let eta = single_eta(&args.common, ETA_SWEEP)?;
            let s = sweep(&model, &grid(&model, &args)?, eta, &k_list(&model, &args.common)?)?;
            report_failures(s.failures());
            let text = match args.common.format {
                Format::Csv => channels_csv(&s, args.common.side.into()),
                Format::Json => json_text(&serde_json::to_value(&s).expect("json serializes")),
            };
            emit(&args.common, &text)?;
            Ok(failure_code(s.failures()))
        }
        Command::Transmit(args) => {
            let model = load_model(&args.common.model)?;
            let eta = single_eta(&args.common, ETA_TRANSPORT)?;
            let s = sweep(&model, &grid(&model, &args)?, eta, &k_list(&model, &args.common)?)?;
            report_failures(s.failures());
            let text = match args.common.format {
                Format::Csv => transmit_csv(&s),
                Format::Json => json_text(&serde_json::to_value(&s).expect("json serializes")),
            };
            emit(&args.common, &text)?;
            Ok(failure_code(s.failures()))
        }
        Command::Bloch(args) => run_bloch(&args),
        Command::Scatter(args) => run_scatter(&args),
        Command::FitEdge(args) => run_fit_edge(&args),
        Command::Peaks(args) => run_peaks(&args),
        Command::Validate(common) => run_validate(&common),
    }
}

fn report_failures(n: usize) {
    if n > 0 {
        eprintln!("warning: {n} sweep point(s) failed; their transmissions are NaN and their channel rows are omitted");
    }
}

/// Output is still written when points fail, but the run reports a
/// numerical failure.
fn failure_code(n: usize) -> i32 {
    if n > 0 {
        2
    } else {
        0
    }
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Outgoing => "outgoing",
        Direction::Incoming => "incoming",
        Direction::Decaying => "decaying",
        Direction::Growing => "growing",
    }
}

fn k_text(k: Option<f64>) -> String {
    k.map(fmt_float).unwrap_or_default()
}

fn run_bloch(args: &SweepArgs) -> Result<i32> {
    let model = load_model(&args.common.model)?;
    let side: Side = args.common.side.into();
    let mut csv = String::from("E,k,index,beta_re,beta_im,abs_beta,propagating,velocity,direction\n");
    let mut points = Vec::new();
    for e in grid(&model, args)? {
        for k in k_list(&model, &args.common)? {
            let spectrum = bloch_states(&model.lead(side).blocks(k)?, side, e)?;
            let mut states = Vec::new();
            for (i, s) in spectrum.states.iter().enumerate() {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    fmt_float(e),
                    k_text(k),
                    i,
                    fmt_float(s.beta.re),
                    fmt_float(s.beta.im),
                    fmt_float(s.beta.norm()),
                    u8::from(s.propagating),
                    fmt_float(s.velocity),
                    direction_name(s.direction)
                ));
                states.push(json!({
                    "beta": [s.beta.re, s.beta.im],
                    "phi": vector_json(&s.phi),
                    "propagating": s.propagating,
                    "velocity": s.velocity,
                    "direction": direction_name(s.direction),
                    "band_edge": s.band_edge,
                    "residual": s.residual,
                }));
            }
            points.push(json!({ "energy": e, "k": k, "side": side.name(), "states": states }));
        }
    }
    let text = match args.common.format {
        Format::Csv => csv,
        Format::Json => json_text(&Value::Array(points)),
    };
    emit(&args.common, &text)?;
    Ok(0)
}

fn run_scatter(args: &SweepArgs) -> Result<i32> {
    let model = load_model(&args.common.model)?;
    let eta = single_eta(&args.common, ETA_TRANSPORT)?;
    let mut csv = String::from("E,k,channel,T_flux,T_row\n");
    let mut points = Vec::new();
    for e in grid(&model, args)? {
        for k in k_list(&model, &args.common)? {
            let a = analyze_point(&model, e, k, eta)?;
            let u = a.channels_l.unit_flux_open();
            let mut waves = Vec::new();
            for i in 0..u.ncols() {
                let chi = scattered_wave(&a.green, &a.im_l, &u.column(i).into_owned())?;
                let t_flux = right_flux(&a.green, &a.im_r, &chi);
                let t_row: f64 = a.transmission.t_squared[i].iter().sum();
                csv.push_str(&format!("{},{},{},{},{}\n", fmt_float(e), k_text(k), i, fmt_float(t_flux), fmt_float(t_row)));
                waves.push(json!({ "channel": i, "chi": vector_json(&chi), "T_flux": t_flux, "T_row": t_row }));
            }
            points.push(json!({
                "energy": e,
                "k": k,
                "t": matrix_json(&a.transmission.t),
                "T_trace": a.transmission.total_trace,
                "T_channel_sum": a.transmission.total_channel_sum,
                "waves": waves,
            }));
        }
    }
    let text = match args.common.format {
        Format::Csv => csv,
        Format::Json => json_text(&Value::Array(points)),
    };
    emit(&args.common, &text)?;
    Ok(0)
}

fn run_fit_edge(args: &EdgeArgs) -> Result<i32> {
    let model = load_model(&args.common.model)?;
    let eta = single_eta(&args.common, ETA_SWEEP)?;
    let side = match args.edge_side {
        EdgeSideArg::Above => Some(EdgeSide::Above),
        EdgeSideArg::Below => Some(EdgeSide::Below),
        EdgeSideArg::Auto => None,
    };
    let window = (args.dmin, args.dmax);
    let limit = super::edge::BROADENING_FACTOR * eta;
    if window.0 < limit {
        return Err(Error::WindowInBroadening { dmin: window.0, limit });
    }
    let ks = k_list(&model, &args.common)?;
    let g = edge_grid(args.e0, window, args.npts, side)?;
    let s = sweep(&model, &g, eta, &ks[..1])?;
    let fit = fit_band_edge(&s, args.common.side.into(), args.e0, window, side)?;
    let text = match args.common.format {
        Format::Csv => format!(
            "e0,side,exponent,stderr,points,dmin,dmax\n{},{},{},{},{},{},{}\n",
            fmt_float(fit.e0),
            if fit.side == EdgeSide::Above { "above" } else { "below" },
            fmt_float(fit.exponent),
            fmt_float(fit.stderr),
            fit.points,
            fmt_float(fit.window.0),
            fmt_float(fit.window.1)
        ),
        Format::Json => json_text(&serde_json::to_value(&fit).expect("json serializes")),
    };
    emit(&args.common, &text)?;
    Ok(0)
}

fn run_peaks(args: &SweepArgs) -> Result<i32> {
    let model = load_model(&args.common.model)?;
    let etas = if args.common.eta.is_empty() { vec![ETA_SWEEP, 10.0 * ETA_SWEEP] } else { args.common.eta.clone() };
    let ks = k_list(&model, &args.common)?;
    let g = grid(&model, args)?;
    let mut csv = String::from("E,k,height,width,eta,background,T\n");
    let mut reports = Vec::new();
    for k in ks {
        let report = detect_peaks(&model, &g, &etas, args.common.side.into(), k)?;
        for p in &report.peaks {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                fmt_float(p.energy),
                k_text(k),
                fmt_float(p.height),
                fmt_float(p.width),
                fmt_float(p.eta),
                fmt_float(p.background),
                fmt_float(p.transmission)
            ));
        }
        for s in &report.scaling {
            eprintln!(
                "peak at E = {:.9}: height ratio {:.4} for eta {:e} vs {:e} (pole value {:.4})",
                s.energy, s.ratio, s.eta_small, s.eta_large, s.expected
            );
        }
        reports.push(report);
    }
    let text = match args.common.format {
        Format::Csv => csv,
        Format::Json => json_text(&serde_json::to_value(&reports).expect("json serializes")),
    };
    emit(&args.common, &text)?;
    Ok(0)
}

fn run_validate(common: &CommonArgs) -> Result<i32> {
    let model = load_model(&common.model)?;
    let eta = single_eta(common, ETA_VALIDATE)?;
    let checks = validate_model(&model, eta)?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    let text = match common.format {
        Format::Csv => {
            let mut s = String::from("E,k,check,value,tolerance,pass\n");
            for c in &checks {
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    fmt_float(c.energy),
                    k_text(c.k),
                    c.name,
                    fmt_float(c.value),
                    fmt_float(c.tolerance),
                    u8::from(c.pass)
                ));
            }
            s
        }
        Format::Json => json_text(&json!({ "eta": eta, "checks": checks, "failed": failed })),
    };
    emit(common, &text)?;
    eprintln!("{} checks, {} failed", checks.len(), failed);
    Ok(if failed == 0 { 0 } else { 2 })
}
