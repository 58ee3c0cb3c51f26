//! Crate-wide error type.
//!
//! Variants are grouped by how the batch driver maps them to exit codes:
//! configuration problems (exit 2), numerical-resolution problems (exit 3)
//! and certificate failures (exit 4).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("normalization error: {0}")]
    Normalization(String),

    #[error("numerical resolution error: {0}")]
    Resolution(String),

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("range error: queried r = {r} beyond grid r_max = {r_max}")]
    Range { r: f64, r_max: f64 },

    #[error("envelope input bound violated at r = {r}: |fhat| = {value} > {bound}")]
    EnvelopeInput { r: f64, value: f64, bound: f64 },

    #[error("envelope derivation error: {0}")]
    Derivation(String),

    #[error("decay fit error: {0}")]
    Fit(String),

    #[error("certificate failed: {0}")]
    CertificateFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the batch CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Normalization(_) => 2,
            Error::Resolution(_) | Error::Truncation(_) | Error::Range { .. } => 3,
            Error::EnvelopeInput { .. } | Error::Derivation(_) | Error::Fit(_) => 2,
            Error::CertificateFailed(_) => 4,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }
}
