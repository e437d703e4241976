//! Library half of the `ialm` command-line harness. The binary in
//! `main.rs` is a thin wrapper, so every command is callable (and tested)
//! as a function.

pub mod builder;
pub mod commands;
pub mod config;
pub mod output;

/// Exit codes used by every command.
pub mod exit_codes {
    /// Run completed and certified / all checks passed.
    pub const OK: i32 = 0;
    /// A check command found violations.
    pub const CHECK_FAILED: i32 = 1;
    /// Configuration could not be parsed or validated.
    pub const CONFIG: i32 = 2;
    /// The solver failed (inner failure, iteration caps, divergence).
    pub const SOLVER: i32 = 3;
    /// Non-finite values appeared in outputs.
    pub const NUMERIC: i32 = 4;
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(ialm_core::Error),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn config(msg: String) -> Self {
        CliError::Config(msg)
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => exit_codes::CONFIG,
            CliError::Solver(e) => match e {
                ialm_core::Error::InvalidOptions(_)
                | ialm_core::Error::InvalidProblem(_)
                | ialm_core::Error::DimensionMismatch { .. } => exit_codes::CONFIG,
                _ => exit_codes::SOLVER,
            },
            CliError::Numeric(_) => exit_codes::NUMERIC,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Solver(e) => write!(f, "solver error: {e}"),
            CliError::Numeric(msg) => write!(f, "numeric fault: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
