//! Branched-transport shape optimization on a staggered grid.
//!
//! The central question: which set of unit volume is cheapest to irrigate
//! from a point source at the origin, when moving mass `m` over length `l`
//! costs `m^alpha * l`? This crate computes approximate optimal shapes by
//! minimizing a smoothed phase-field energy over divergence-constrained
//! vector fields, and then measures the fractal character of the resulting
//! shape's boundary.
//!
//! Pipeline, by module:
//!
//! * [`grid`] — MAC-style staggered discretization of `[-1,1]^2`:
//!   divergence, gradient, interpolation, inner products.
//! * [`problem`] — builds the discrete instance: a mollified point source
//!   `delta` and the divergence box `delta - 1 <= div v <= delta`.
//! * [`energy`] — the smoothed transport energy `F(V)` and its gradient.
//! * [`lbfgs`] — limited-memory quasi-Newton metric (two-loop recursion).
//! * [`projection`] — projection onto the divergence box in the metric
//!   norm, via FISTA on the Fenchel dual.
//! * [`optimizer`] — the outer proximal L-BFGS descent loop.
//! * [`analysis`] — irrigated density, shape/boundary extraction,
//!   box-counting dimension, and closed-form reference exponents.
//! * [`gilbert`] — exact branched-transport costs on small trees; the
//!   ground truth the continuous solver is checked against.
//! * [`io`] — CSV field dumps and PGM images.
//! * [`run`] — end-to-end orchestration used by the CLI.

pub mod analysis;
pub mod config;
pub mod energy;
pub mod gilbert;
pub mod grid;
pub mod io;
pub mod lbfgs;
pub mod optimizer;
pub mod problem;
pub mod projection;
pub mod run;

pub use config::SolverConfig;
pub use grid::{CellField, CellVectorField, GridGeometry, StaggeredField};

use std::fmt;

/// Errors surfaced by fallible operations across the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A configuration value is out of its admissible range.
    InvalidConfig(String),
    /// An unrecognized key in a config file; carries the offending key.
    UnknownKey(String),
    /// Source mollifier radius smaller than one cell.
    SourceTooNarrow { radius: f64, h: f64 },
    /// Tree input is not a rooted tree (cycle or unreachable node).
    MalformedTree(String),
    /// Not enough usable scales to fit a box-counting slope.
    NoDimensionEstimate(String),
    /// An I/O failure, with context.
    Io(String),
    /// A numeric file could not be parsed.
    Parse(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::UnknownKey(key) => write!(f, "unknown configuration key: {key}"),
            Error::SourceTooNarrow { radius, h } => {
                write!(f, "source radius {radius} is below the cell width {h}")
            }
            Error::MalformedTree(msg) => write!(f, "malformed tree: {msg}"),
            Error::NoDimensionEstimate(msg) => write!(f, "no dimension estimate: {msg}"),
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
