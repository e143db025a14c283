//! Sweeps, band-edge fits, surface-state peaks, output formats and the
//! command-line front end.

pub mod cli;
pub mod edge;
pub mod output;
pub mod peaks;
pub mod sweep;
pub mod validate;

pub use cli::run_cli;
pub use edge::{edge_grid, fit_band_edge, EdgeFit, EdgeSide};
pub use peaks::{detect_peaks, Peak, PeakReport, ScalingCheck};
pub use sweep::{analyze_point, energy_grid, sweep, PointAnalysis, PointRecord, SweepResult};
pub use validate::{validate_model, CheckResult};
