//! Failure classes and their process exit codes.

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_PROVENANCE: i32 = 4;
pub const EXIT_CONVERGENCE: i32 = 5;

#[derive(Debug, Error)]
pub enum Failure {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("provenance violation: {0}")]
    Provenance(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Data(_) => EXIT_DATA,
            Failure::Provenance(_) => EXIT_PROVENANCE,
        }
    }
}

/// Exit code for an error chain: the first [`Failure`] decides, any other
/// error is a data problem.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    err.chain()
        .find_map(|e| e.downcast_ref::<Failure>())
        .map_or(EXIT_DATA, Failure::exit_code)
}
