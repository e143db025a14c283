//! CSV and JSON serialisation of results, with atomic file writes.
//!
//! Floats are written with 17 significant digits so values round-trip
//! exactly; identical inputs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use super::sweep::{PointRecord, SweepResult};
use crate::embed::Side;
use crate::error::Result;
use crate::linalg::{CMatrix, CVector};

pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_k(k: Option<f64>) -> String {
    k.map(fmt_float).unwrap_or_default()
}

pub const CHANNELS_HEADER: &str = "E,k,index,lambda,open";
pub const TRANSMIT_HEADER: &str = "E,k,T_trace,T_channel_sum,discrepancy,n_open_l,n_open_r";

/// One row per channel eigenvalue of `lead` at every sweep point.
pub fn channels_csv(sweep: &SweepResult, lead: Side) -> String {
    let mut out = String::from(CHANNELS_HEADER);
    out.push('\n');
    let tau = sweep.metadata.tau_open;
    for r in &sweep.records {
        for (i, &lam) in r.lambdas(lead).iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_float(r.energy),
                fmt_k(r.k),
                i,
                fmt_float(lam),
                u8::from(lam < -tau)
            );
        }
    }
    out
}

fn transmit_row(out: &mut String, r: &PointRecord) {
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{}",
        fmt_float(r.energy),
        fmt_k(r.k),
        fmt_float(r.t_trace),
        fmt_float(r.t_channel_sum),
        fmt_float(r.discrepancy),
        r.n_open_l,
        r.n_open_r
    );
}

/// One row per `(E, K)` point; K-summed rows (`k = sum`) follow the K rows
/// of each energy when several K points were swept.
pub fn transmit_csv(sweep: &SweepResult) -> String {
    let mut out = String::from(TRANSMIT_HEADER);
    out.push('\n');
    let nk = sweep.k_list.len();
    for (ie, chunk) in sweep.records.chunks(nk).enumerate() {
        for r in chunk {
            transmit_row(&mut out, r);
        }
        if let Some(s) = sweep.k_sums.get(ie) {
            let _ = writeln!(
                out,
                "{},sum,{},{},{},{},{}",
                fmt_float(s.energy),
                fmt_float(s.t_trace),
                fmt_float(s.t_channel_sum),
                fmt_float(s.discrepancy),
                s.n_open_l,
                s.n_open_r
            );
        }
    }
    out
}

/// Complex matrix as nested `[re, im]` arrays.
pub fn matrix_json(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect()))
            .collect(),
    )
}

pub fn vector_json(v: &CVector) -> Value {
    Value::Array(v.iter().map(|z| json!([z.re, z.im])).collect())
}

/// Write through a temporary file in the target directory and rename it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
