use thiserror::Error;

/// Every failure the library can report.
///
/// Variants split into validation problems (bad input) and numerical problems
/// (the input is fine but the requested quantity does not exist or could not be
/// computed reliably). [`Error::category`] gives a stable machine-readable tag.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid disorder specification: {0}")]
    InvalidDisorder(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("operator too large: {dim}x{dim} exceeds the limit of {limit}")]
    Sizing { dim: usize, limit: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("no stationary state: {count} eigenvalue(s) with Re(lambda) >= -{eps:e}, largest Re(lambda) = {max_re:e}")]
    NoStationaryState { count: usize, max_re: f64, eps: f64 },

    #[error("ill-conditioned solve: {0}")]
    IllConditioned(String),

    #[error("symmetry violated: {0}")]
    Symmetry(String),

    #[error("spectral gap closes at k = {k}, eta = {eta} (gap {gap:e})")]
    GapClosure { k: f64, eta: f64, gap: f64 },

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("unphysical covariance: {0}")]
    Unphysical(String),

    #[error("unstable growth: {0}")]
    UnstableGrowth(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("construction mismatch: {0}")]
    Construction(String),
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid-parameter",
            Error::InvalidDisorder(_) => "invalid-disorder",
            Error::Unsupported(_) => "unsupported-combination",
            Error::Sizing { .. } => "sizing",
            Error::Eigensolver(_) => "eigensolver-failure",
            Error::NoStationaryState { .. } => "no-stationary-state",
            Error::IllConditioned(_) => "ill-conditioned",
            Error::Symmetry(_) => "symmetry-violation",
            Error::GapClosure { .. } => "gap-closure",
            Error::NotConverged(_) => "not-converged",
            Error::Unphysical(_) => "unphysical-covariance",
            Error::UnstableGrowth(_) => "unstable-growth",
            Error::Precondition(_) => "precondition-violated",
            Error::Construction(_) => "construction-mismatch",
        }
    }

    /// True for errors caused by the input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::InvalidDisorder(_)
                | Error::Unsupported(_)
                | Error::Sizing { .. }
                | Error::Precondition(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
