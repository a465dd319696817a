use wasscopos_solver::{SolverError, Status};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: {detail}")]
    Dimension { what: &'static str, detail: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("unbounded: {0}")]
    Unbounded(String),
    #[error("solver finished with status {status}")]
    NonOptimal { status: Status },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension { what, detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
