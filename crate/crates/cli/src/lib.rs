//! Configuration, file formats and command execution for the `hgf` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod format;
pub mod run;

pub use config::{Overrides, RunConfig};
pub use run::{run, Outcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] hgf_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_status(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}
