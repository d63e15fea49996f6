use thiserror::Error;

/// Errors raised anywhere in the crate.
///
/// Variants are grouped by [`ErrorClass`], which the CLI maps onto exit codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("delay must be positive, got tau = {0}")]
    DelayNonPositive(f64),
    #[error("Re(lambda) = {re} exceeds 1/tau = {limit}")]
    EigenvalueOutOfRange { re: f64, limit: f64 },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("initial history f(0) = {f0} is incompatible with x = {x}")]
    IncompatibleInit { f0: String, x: String },
    #[error("step too coarse: m = {0} (need m >= 8)")]
    StepTooCoarse(usize),
    #[error("time {0} is not on the trajectory grid")]
    OffGrid(f64),

    #[error("no eta_pi root: {0}")]
    NoRoot(String),
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),
    #[error("NotInRegion: {0}")]
    NotInRegion(String),

    #[error("contour passes within {min_modulus:e} of a root")]
    ContourTooClose { min_modulus: f64 },
    #[error("no convergence after {iterations} iterations: {message}")]
    NoConvergence { iterations: usize, message: String },
    #[error("denominator {value:e} too close to zero")]
    DenominatorNearZero { value: f64 },
    #[error("|gamma| and |Re lambda| nearly coincide ({gap:e}); use the closed form")]
    NearDegenerate { gap: f64 },
    #[error("quadrature tolerance not met: estimated error {estimate:e} > {tol:e}")]
    ToleranceNotMet { estimate: f64, tol: f64 },
    #[error("component {k}: closed form {closed} disagrees with quadrature {quadrature}")]
    QuadratureMismatch {
        k: usize,
        closed: f64,
        quadrature: f64,
    },
}

/// Coarse classification of an [`Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input or violated preconditions.
    Usage,
    /// A mathematical hypothesis (region membership etc.) does not hold.
    Hypothesis,
    /// A numerical procedure failed to deliver the requested accuracy.
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            DelayNonPositive(_)
            | EigenvalueOutOfRange { .. }
            | Parse { .. }
            | Validation { .. }
            | InvalidArgument(_)
            | Index(_)
            | IncompatibleInit { .. }
            | StepTooCoarse(_)
            | OffGrid(_) => ErrorClass::Usage,
            NoRoot(_) | DegenerateRegion(_) | NotInRegion(_) => ErrorClass::Hypothesis,
            ContourTooClose { .. }
            | NoConvergence { .. }
            | DenominatorNearZero { .. }
            | NearDegenerate { .. }
            | ToleranceNotMet { .. }
            | QuadratureMismatch { .. } => ErrorClass::Numerical,
        }
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
