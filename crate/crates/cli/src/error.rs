use thiserror::Error;

/// CLI failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver failure: {0}")]
    Solver(#[from] hodograph_core::Error),

    #[error("output error: {0}")]
    Io(#[from] std::io::Error),

    #[error("comparison gate failed: max error {max_error:e} > {tol:e} ({failures} failing rows)")]
    Gate { max_error: f64, tol: f64, failures: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solver(_) | CliError::Io(_) => 2,
            CliError::Gate { .. } => 3,
        }
    }
}
