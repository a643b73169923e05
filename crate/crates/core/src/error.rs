use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants map onto three broad classes used by the scenario runner:
/// contract violations by the caller, numerical failures, and malformed input.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(
        "eigensolver did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})"
    )]
    SolverFailure { sweeps: usize, residual: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below -{threshold:e}")]
    NotPsd { eigenvalue: f64, threshold: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("preparation is not normalized: omega(1,1) = {measured}")]
    Normalization { measured: f64 },

    #[error("preparation takes a non-real value {value:e}i on a Hermitian pair ({pair})")]
    NonReal { value: f64, pair: String },

    #[error("state is not faithful: min eigenvalue {min_eigenvalue:e} <= {threshold:e}; restrict to the support first")]
    NotFaithful { min_eigenvalue: f64, threshold: f64 },

    #[error("state is ill-conditioned: eigenvalue ratio {ratio:e} < {threshold:e}")]
    IllConditioned { ratio: f64, threshold: f64 },

    #[error("numerical failure in {what}: residual {residual:e}")]
    Numerical { what: String, residual: f64 },

    #[error("degenerate preparation: Bob marginal has rank 0")]
    DegeneratePreparation,

    #[error("invalid preparation: {0}")]
    InvalidPreparation(String),

    #[error("invalid POVM {povm}: {reason}")]
    InvalidPovm { povm: String, reason: String },

    #[error("unknown map '{0}'")]
    UnknownMap(String),

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Short machine-readable tag used in structured error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::SolverFailure { .. } => "solver_failure",
            Error::NotPsd { .. } => "not_psd",
            Error::Contract(_) => "contract",
            Error::Normalization { .. } => "normalization",
            Error::NonReal { .. } => "non_real",
            Error::NotFaithful { .. } => "not_faithful",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::Numerical { .. } => "numerical",
            Error::DegeneratePreparation => "degenerate_preparation",
            Error::InvalidPreparation(_) => "invalid_preparation",
            Error::InvalidPovm { .. } => "invalid_povm",
            Error::UnknownMap(_) => "unknown_map",
            Error::Schema { .. } => "schema",
            Error::Io(_) => "io",
        }
    }
}
