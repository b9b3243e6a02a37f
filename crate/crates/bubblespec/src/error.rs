use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid input: parameters, dimensions, configuration.
    #[error("validation error: {0}")]
    Validation(String),
    /// A numerical procedure failed: non-convergence, regime exit, collapse.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) => 1,
            Error::Numerical(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
