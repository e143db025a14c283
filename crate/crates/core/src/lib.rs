//! Conduction channels of lead embedding potentials, their relation to
//! lead Bloch states, and two-terminal transmission computed both channel
//! by channel and through the trace formula.
//!
//! Pipeline for one energy `E` (and transverse momentum `K` for strips):
//!
//! 1. [`model`] builds principal-layer blocks for each lead and the device.
//! 2. [`embed`] computes the embedding potential `Sigma(E + i eta)` of each
//!    lead and its anti-Hermitian part `Sigma~`.
//! 3. [`channels`] diagonalises `Sigma~` into open and closed channels.
//! 4. [`bloch`] solves the lead Bloch problem and maps outgoing Bloch
//!    states onto open channels.
//! 5. [`transport`] embeds the leads into the device and evaluates the
//!    channel t-matrix and the trace formula.
//!
//! [`spectra`] sweeps energies, fits band-edge laws, locates surface-state
//! peaks and hosts the command-line front end.

pub mod bloch;
pub mod channels;
pub mod embed;
pub mod error;
pub mod linalg;
pub mod model;
pub mod spectra;
pub mod transport;

pub use error::{Error, Result};
