//! Library side of the `evrep` command-line tool.
//!
//! Every number the tool prints comes from `evrep-core`; this crate parses
//! configurations, dispatches, and formats.

pub mod commands;
pub mod config;
pub mod table;

use thiserror::Error;

pub use commands::{
    cmd_evolve, cmd_quorum, cmd_reconstruct, cmd_spectrum, EvolveOutcome, QuorumReport,
};
pub use config::{Format, InitialState, LoadedConfig, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] evrep_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical failures, 1 for i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}
