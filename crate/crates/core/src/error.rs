use std::path::PathBuf;

/// Errors produced by the solver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A density evaluation left the representable range of `f64`.
    #[error("range error: {what} (argument {arg})")]
    Range { what: &'static str, arg: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative solver failed to meet its tolerance.
    #[error(
        "{what} did not converge: bracket [{}, {}], residuals [{}, {}]",
        bracket.0, bracket.1, residuals.0, residuals.1
    )]
    NonConvergence {
        what: &'static str,
        bracket: (f64, f64),
        residuals: (f64, f64),
    },

    /// No tie between double and triple intervals up to the search cap.
    #[error("no tie for V1 = {v1}: mu = {mu_at_cap} > 0 at V2 = {cap}")]
    NoTie { v1: f64, cap: f64, mu_at_cap: f64 },

    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// True for errors that indicate bad input rather than numerical trouble.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Precondition(_) | Error::Parse(_) | Error::Io { .. } | Error::Csv(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
