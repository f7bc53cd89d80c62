use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("inverse DFT left an imaginary residue of {residue:e}; spectrum is not conjugate-symmetric")]
    CorruptSpectrum { residue: f64 },

    #[error("SVD failed to converge on Fourier slice {slice}")]
    SvdFailure { slice: usize },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("non-finite value encountered at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("sample {sample} is not observed in any view")]
    UnobservedSample { sample: usize },

    #[error("view {view}: {reason}")]
    InvalidView { view: usize, reason: String },

    #[error("view {view}: declared {declared} but data file holds {actual}")]
    DimMismatch { view: usize, declared: String, actual: String },

    #[error("malformed container: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures caused by the filesystem rather than by the content
    /// of an input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
