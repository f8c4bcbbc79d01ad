use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a mathematical precondition (non-simplex probabilities,
    /// negative rates, zero-norm targets, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs are structurally inconsistent (ragged records, mismatched lengths).
    #[error("structural error: {0}")]
    Structure(String),

    /// The request exceeds a hard implementation bound (e.g. qubit count).
    #[error("capability error: {0}")]
    Capability(String),

    /// An encoding or run configuration is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical routine failed to produce a usable result.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Reading or writing an artifact failed.
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
