use thiserror::Error;

/// Errors produced by the library.
///
/// The CLI maps these onto exit codes: `Input`/`Config` → 2,
/// `Numerical` → 3, `Degenerate` → 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent caller input (dimension mismatches,
    /// empty datasets, out-of-range parameters).
    #[error("input error: {0}")]
    Input(String),

    /// A configuration that can never work (unknown solver name,
    /// analytic quadrature for an unsupported set/basis pair,
    /// non-unisolvent artificial points).
    #[error("configuration error: {0}")]
    Config(String),

    /// Numerical breakdown (factorization failure, solver iteration cap).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Structurally valid problem with a degenerate outcome
    /// (infeasible/unbounded LP, zero oracle-positive samples).
    #[error("degenerate result: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
