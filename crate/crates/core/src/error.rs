use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPositiveSemidefinite { min_eig: f64 },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("complete positivity violated (min eigenvalue {min_eig:e}, zeta {zeta:?})")]
    CpViolation { min_eig: f64, zeta: Option<f64> },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("fit failed: {0}")]
    FitError(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad inputs rather than failed numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::DegenerateData(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
