//! Integral Khovanov homology of braid closures.
//!
//! The pipeline follows the discrete-Morse-theory route: dotted cobordism
//! category ([`cob`]) → cube of resolutions and delooping ([`cube`]) →
//! matchings and Gaussian elimination ([`morse`]), with planar-algebra
//! composition ([`planar`]), exact integer homology ([`homology`]), the
//! explicit torus-braid matchings ([`torus`]) and the two-parameter family
//! reduction ([`reduce`]). [`cli`] wraps everything for the `braidhom` binary.

pub mod cob;
pub mod cube;
pub mod morse;
pub mod torus;
pub mod planar;
pub mod homology;
pub mod reduce;
pub mod cli;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("incompatible boundaries: {0}")]
    Mismatch(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 parse, 3 budget, 4 anything internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) => 2,
            Error::Budget(_) => 3,
            _ => 4,
        }
    }
}
