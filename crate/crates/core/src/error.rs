use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Operand shapes do not match what an operator or routine expects.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numeric parameter is out of its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A structured routine was handed a problem it cannot represent
    /// (e.g. a non-co-diagonalizable precision term in a Fourier solve).
    #[error("incompatible structure: {0}")]
    Structure(String),

    /// A model was assembled inconsistently (missing sampler strategy,
    /// singular precision, alpha/rho mismatch, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Dense factorization failed (matrix not positive definite).
    #[error("factorization failed: {0}")]
    Factorization(String),

    /// A numeric invariant was violated at run time (NaN/Inf, complex residue).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Malformed image or config file.
    #[error("format error: {0}")]
    Format(String),

    /// Bad command line or config-file input.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
