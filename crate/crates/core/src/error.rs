use thiserror::Error;

use crate::stable_motion::Regime;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain the operation is defined on.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    /// A numerical routine could not reach its accuracy target.
    #[error("{what}: achieved error bound {achieved:.3e} exceeds target {target:.3e}")]
    NumericAccuracy {
        what: String,
        achieved: f64,
        target: f64,
    },

    /// Two independent evaluation routes disagree.
    #[error("{what}: cross-check mismatch ({first} vs {second}, relative gap {rel_gap:.3e})")]
    CrossCheck {
        what: String,
        first: f64,
        second: f64,
        rel_gap: f64,
    },

    #[error("regime {found:?} not supported for {requested}; valid window: {window}")]
    UnsupportedRegime {
        requested: String,
        found: Regime,
        window: String,
    },

    #[error("integral diverges: {0}")]
    Divergence(String),

    #[error("population explosion: {live} live particles exceed the cap of {cap}")]
    PopulationExplosion { live: usize, cap: usize },

    #[error("path refinement: {0}")]
    PathRefinement(String),

    /// Invalid configuration; `path` names the offending field.
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    /// Failure inside an experiment, tagged with where it happened.
    #[error("n = {n}, replicate {replicate}: {source}")]
    Replicate {
        n: u64,
        replicate: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
