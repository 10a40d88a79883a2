use std::path::PathBuf;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function that received it.
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    /// A bracketed root search could not find a sign change.
    #[error("root not bracketed in {func}: {detail}")]
    Bracket { func: &'static str, detail: String },

    /// An iterative optimizer ran out of budget or stalled.
    #[error("no convergence in {func} after {iterations} iterations: {detail}")]
    Convergence {
        func: &'static str,
        iterations: usize,
        detail: String,
    },

    /// A model fit could not be started or produced an unusable answer.
    #[error("fit failure: {0}")]
    Fit(String),

    /// The profiled amplitude of a series is undefined because its model vanishes.
    #[error("singular amplitude profile for series at T = {temperature_k} K")]
    SingularProfile { temperature_k: f64 },

    /// Not enough samples for a statistical estimate.
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// Two traces (or a trace and a window) do not share a sample grid.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The filter support extends beyond the recorded trace.
    #[error("filter window [{start:.6e}, {end:.6e}] s falls outside trace [{trace_start:.6e}, {trace_end:.6e}] s")]
    WindowOverlap {
        start: f64,
        end: f64,
        trace_start: f64,
        trace_end: f64,
    },

    /// A linearized formula is used outside its range of validity.
    #[error("validity error: {0}")]
    Validity(String),

    /// A file violates its schema; `location` names the field and, for CSV, the line.
    #[error("schema error in {}: {location}: {detail}", path.display())]
    Schema {
        path: PathBuf,
        location: String,
        detail: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            func,
            detail: detail.into(),
        }
    }

    /// True for failures of numerical machinery rather than of user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Bracket { .. }
                | Error::Convergence { .. }
                | Error::Fit(_)
                | Error::SingularProfile { .. }
        )
    }
}
