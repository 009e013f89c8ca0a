//! Spatial-consistency simulation and evaluation for massive-SIMO channels.
//!
//! A transmitter moves along a straight track while a cylindrical base
//! station array records OFDM channel snapshots. The pipeline is
//!
//! 1. [`synth`]: build a [`Scenario`] (often from a [`Preset`]) and
//!    synthesise a [`ChannelTrace`];
//! 2. [`covar`]: cut the trace into long-term windows and estimate one
//!    spatial covariance per window;
//! 3. [`metric`] and [`evalpipe`]: compare every window with the first
//!    using the CMD similarity, giving a [`SimilarityCurve`];
//! 4. [`classify`]: label curves with a transparent rule set and
//!    summarise classes as envelopes.
//!
//! [`traceio`] covers the binary, TOML and CSV formats.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
        assert!((a - b).abs() <= tol, "{} = {a} vs {b} (tol {tol})", stringify!($a));
    }};
}

pub mod array;
pub mod classify;
pub mod covar;
pub mod evalpipe;
pub mod geometry;
pub mod metric;
pub mod synth;
pub mod traceio;

use thiserror::Error;

pub use array::{ArrayConfig, ArrayManifold, ElementPattern};
pub use classify::{classify_curve, ClassLabel, ClassThresholds, TrackClass};
pub use covar::{CovarianceMatrix, EvalConfig};
pub use evalpipe::{evaluate_trace, ClassEnvelope, SimilarityCurve};
pub use geometry::{BsConfig, Position3D, Track};
pub use metric::{cmd_similarity, Similarity};
pub use synth::{make_scenario, synthesize, ChannelTrace, Preset, Scenario, ScenarioParams};
pub use traceio::RunConfig;

/// Metres per second.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `"spatcon <version>"`, recorded in every output file.
pub fn tool_version() -> String {
    format!("spatcon {}", env!("CARGO_PKG_VERSION"))
}

/// Any error the library can return.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Array(#[from] array::ArrayError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
    #[error(transparent)]
    Covar(#[from] covar::CovarError),
    #[error(transparent)]
    Metric(#[from] metric::MetricError),
    #[error(transparent)]
    Eval(#[from] evalpipe::EvalError),
    #[error(transparent)]
    Classify(#[from] classify::ClassifyError),
    #[error(transparent)]
    Io(#[from] traceio::TraceIoError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
