use thiserror::Error;

/// Everything that can go wrong inside the lab.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside the domain: {reason}")]
    Domain {
        what: &'static str,
        value: f64,
        reason: String,
    },

    #[error("{family} estimate in d = {d} needs exponent > {threshold}, got {exponent}")]
    BelowThreshold {
        family: &'static str,
        d: usize,
        exponent: f64,
        threshold: f64,
    },

    #[error("dimension d = {d} not supported here: {reason}")]
    UnsupportedDimension { d: usize, reason: String },

    #[error("kernel |w|^{p} is too singular for grid quadrature (need p > -1)")]
    UnsupportedSingularity { p: f64 },

    #[error("under-resolved: {reason} (try half-width L >= {suggested_l:.3}, n >= {suggested_n})")]
    Resolution {
        reason: String,
        suggested_l: f64,
        suggested_n: usize,
    },

    #[error("quadrature did not converge: {0}")]
    Convergence(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("bad field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(what: &'static str, value: f64, reason: impl Into<String>) -> Error {
    Error::Domain {
        what,
        value,
        reason: reason.into(),
    }
}
