//! Desk-scale simulation and reconstruction of optical squeezed cat states.
//!
//! An odd "cat" state (two out-of-phase coherent amplitudes in superposition)
//! is prepared by subtracting one photon from squeezed vacuum, then fed
//! through a phase-sensitive in-line squeezer that amplifies or deamplifies
//! its superposition direction. This crate models that chain in a truncated
//! Fock space, synthesizes the homodyne traces such an experiment records,
//! and reconstructs density matrices from those traces by iterative
//! maximum-likelihood, including detector-efficiency correction.
//!
//! Conventions used throughout:
//!
//! * quadratures `x = (a + a†)/√2`, `p = i(a† − a)/√2`, so the vacuum
//!   variance is 1/2 and a coherent state of real amplitude α sits at
//!   `x = √2 α`;
//! * the squeezing operator is `S(ζ) = exp[(ζ* a² − ζ a†²)/2]` with
//!   `ζ = −r e^{iθ}`: `θ = 0` amplifies x (squeezes p), `θ = π`
//!   deamplifies x (squeezes x);
//! * squeezing in dB is `10 log10 e^{−2r}`, so −3 dB ⇔ r ≈ 0.3454.

pub mod fock;
pub mod homodyne;
pub mod linalg;
pub mod prep;
pub mod tomo;
pub mod wigner;

pub mod cli;

use std::path::PathBuf;

/// Crate-wide error type. Variants group into usage errors (rejected
/// parameters), data errors (unreadable or invalid inputs) and numerical
/// failures (non-convergence, degenerate fits).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("state validation failed: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("malformed data: {0}")]
    Data(String),
    #[error("output already exists, pass --force to overwrite: {0}")]
    OutputExists(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for this error: 2 usage, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Dimension(_) | Error::Parameter(_) | Error::OutputExists(_) => 2,
            Error::Validation(_) | Error::Data(_) | Error::Io(_) | Error::Json(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
