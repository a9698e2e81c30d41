use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] strongeq::Error),

    #[error("{0}")]
    Usage(String),

    #[error("no equilibrium found: {0}")]
    NoConvergence(String),

    #[error("{failed} of {total} expected values not reproduced")]
    Mismatch { failed: usize, total: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Machine-readable form written to stderr on failure.
#[derive(Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub exit: i32,
    pub message: String,
}

impl CliError {
    pub fn code(&self) -> &'static str {
        use strongeq::Error as E;
        match self {
            CliError::Core(E::Config(_)) => "config",
            CliError::Core(
                E::InvalidModel { .. }
                | E::InvalidGenerator(_)
                | E::Dimension { .. }
                | E::InfeasibleRow { .. }
                | E::UnboundedBox { .. }
                | E::MeshTooCoarse { .. }
                | E::OutsideDomain { .. }
                | E::UnknownExample(_)
                | E::Unsupported(_),
            ) => "validation",
            CliError::Core(_) => "numerical",
            CliError::Usage(_) => "usage",
            CliError::NoConvergence(_) => "no_convergence",
            CliError::Mismatch { .. } => "mismatch",
            CliError::Io { .. } => "io",
        }
    }

    /// 1 I/O, 2 usage, 3 config or validation, 4 solver non-convergence,
    /// 5 numerical failure, 6 reproduction mismatch.
    pub fn exit_code(&self) -> i32 {
        match self.code() {
            "io" => 1,
            "usage" => 2,
            "config" | "validation" => 3,
            "no_convergence" => 4,
            "numerical" => 5,
            "mismatch" => 6,
            _ => 1,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            code: self.code(),
            exit: self.exit_code(),
            message: self.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
