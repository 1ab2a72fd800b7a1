use thiserror::Error;

/// Failures surfaced by the command-line tool, each with its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Budget(String),

    #[error("{0}")]
    Stall(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Stall(_) => 4,
            CliError::Io(_) | CliError::Solver(_) => 1,
        }
    }
}

impl From<powergame::Error> for CliError {
    fn from(e: powergame::Error) -> Self {
        use powergame::Error as E;
        match e {
            E::InvalidInput(_) | E::Dimension(_) => CliError::Config(e.to_string()),
            E::Budget { .. } => CliError::Budget(format!(
                "{e}; reduce the number of actions or types, or raise solver.max_tableau_entries"
            )),
            E::Stalled { .. } => CliError::Stall(format!("{e}; raise solver.max_iterations or adjust tolerances")),
            E::Internal(_) => CliError::Solver(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
