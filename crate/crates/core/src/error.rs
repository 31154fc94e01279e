use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("laplace prior is not differentiable at theta[{index}] = 0; pass an active-set mask")]
    KinkWithoutMask { index: usize },

    #[error("{solver} did not converge after {iterations} iterations (last change {last_change:.3e})")]
    NonConvergence { solver: &'static str, iterations: usize, last_change: f64 },

    #[error("non-identifiable problem: {0}")]
    NonIdentifiable(String),

    #[error("{what} is singular (condition number {cond:.3e})")]
    Singular { what: &'static str, cond: f64 },

    #[error("sampler acceptance rate {rate:.3} outside [{lo}, {hi}]")]
    AcceptanceRate { rate: f64, lo: f64, hi: f64 },

    #[error("predictive density underflows for every draw at row {row}")]
    Underflow { row: usize },

    #[error("objective failed at xi = {xi:?}: {source}")]
    Objective { xi: Vec<f64>, source: Box<Error> },

    #[error("every objective evaluation was non-finite")]
    NoFiniteEvaluation,

    #[error("treatment {0} unobserved")]
    TreatmentUnobserved(usize),
}

impl Error {
    /// True for errors caused by malformed inputs or configuration rather than
    /// numerical trouble during fitting.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::InvalidInput(_) | Error::Dimension(_) | Error::TreatmentUnobserved(_) => true,
            Error::Objective { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
