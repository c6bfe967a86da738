//! Case and configuration ingestion, simulation invocation, and artifact
//! writers for the semi-analytical transient simulator.

pub mod caseio;
pub mod exec;
pub mod figures;
pub mod output;
pub mod run;

use std::path::PathBuf;

use thiserror::Error;

/// Stable process exit codes, one per failure family.
pub mod exit_codes {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const VALIDATION: i32 = 4;
    pub const INIT: i32 = 5;
    pub const INTERFACE: i32 = 6;
    pub const DIVERGENCE: i32 = 7;
    pub const STEP_UNDERFLOW: i32 = 8;
    pub const IO: i32 = 9;
    pub const COMPARE: i32 = 10;
    pub const OTHER: i32 = 1;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Parse { path: PathBuf, detail: String },
    #[error("{path}: {detail}")]
    Validation { path: PathBuf, detail: String },
    #[error("device initialization failed: {detail}")]
    Init { detail: String },
    #[error("{0}")]
    Interface(String),
    #[error("{0}")]
    Divergence(String),
    #[error("{0}")]
    StepUnderflow(String),
    #[error("comparison failed: {0}")]
    Compare(String),
    #[error("{0}")]
    Figures(String),
    #[error("invalid flags: {0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => exit_codes::IO,
            CliError::Parse { .. } => exit_codes::PARSE,
            CliError::Validation { .. } => exit_codes::VALIDATION,
            CliError::Init { .. } => exit_codes::INIT,
            CliError::Interface(_) => exit_codes::INTERFACE,
            CliError::Divergence(_) => exit_codes::DIVERGENCE,
            CliError::StepUnderflow(_) => exit_codes::STEP_UNDERFLOW,
            CliError::Compare(_) | CliError::Figures(_) => exit_codes::COMPARE,
            CliError::Usage(_) => exit_codes::USAGE,
        }
    }
}

/// Maps an engine error onto the CLI failure families.
pub fn from_sim_error(e: sassim_core::engine::SimError, path: &std::path::Path) -> CliError {
    use sassim_core::engine::SimError;
    match e {
        SimError::Case(err) => CliError::Validation {
            path: path.to_path_buf(),
            detail: err.to_string(),
        },
        SimError::Device(err) => CliError::Init {
            detail: err.to_string(),
        },
        SimError::InitResidual { .. } => CliError::Init {
            detail: e.to_string(),
        },
        SimError::Interface { .. } => CliError::Interface(e.to_string()),
        SimError::Propagation { .. } => CliError::Divergence(e.to_string()),
        SimError::Network { .. } => CliError::Interface(e.to_string()),
        SimError::StepUnderflow { .. } => CliError::StepUnderflow(e.to_string()),
        SimError::BadConfig { detail } => CliError::Usage(detail.to_string()),
    }
}
