use thiserror::Error;

/// Errors raised by the certification pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("mesh too coarse: no interior degrees of freedom")]
    TooCoarse,

    #[error("requested {requested} eigenpairs but the system only has {dofs} degrees of freedom")]
    TooFewDofs { requested: usize, dofs: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("trial functions are linearly dependent (normalized gram determinant {0:e})")]
    DependentTrialFunctions(f64),

    #[error("mass orthonormalization defect {0:e} exceeds 1e-12")]
    OrthonormalityDefect(f64),

    #[error("discrete lower eigenvalue {floor} not confirmed by the positive-definiteness check")]
    InertiaCheckFailed { floor: f64 },

    #[error("cannot certify from this point: xi_h = {xi_h} >= 7/3")]
    CannotCertify { xi_h: f64 },

    #[error("{0}")]
    Io(String),

    #[error("certificate schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
