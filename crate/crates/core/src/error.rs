use thiserror::Error;

/// Errors raised by estimation, inference and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Caller passed arguments that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    /// The data cannot support the requested computation (zero variance,
    /// constant outcome, ...).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("iteration diverged at k = {k} (|beta| = {norm})")]
    Divergence { k: usize, norm: f64 },

    /// The fitted coefficient on the normalized covariate is not positive.
    #[error("normalization failed: coefficient on x0 is {0}, must be strictly positive")]
    Normalization(f64),

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("singular matrix: {0}")]
    Singular(String),
}

impl Error {
    /// True for failures of the numerical procedure itself, as opposed to
    /// bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::Normalization(_)
                | Error::Initialization(_)
                | Error::Singular(_)
                | Error::DegenerateData(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
