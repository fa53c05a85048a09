use thiserror::Error;

/// Errors raised by the model, the solvers and the command-line front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite evaluation of {what} at z = {z}")]
    NonFiniteEvaluation { what: String, z: f64 },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("ODE integrator failed: {0}")]
    IntegratorFailure(String),

    #[error("singular endpoint: {0}")]
    SingularEndpoint(String),

    #[error("discrete stepper lost positivity: component {index} = {value:e}")]
    StabilityError { index: usize, value: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("CFL violation: dt * max(b/width) = {courant:.4} > {limit}")]
    CflViolation { courant: f64, limit: f64 },

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("contraction step underflow at a = {a:e} (delta = {delta:e})")]
    StepUnderflow { a: f64, delta: f64 },

    #[error("fixed-point iteration on [{lo:e}, {hi:e}] is not contracting")]
    NoContraction { lo: f64, hi: f64 },

    #[error("unsupported regime: {0}")]
    RegimeError(String),

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("power iteration stalled after {iterations} iterations (last ratio {ratio:e})")]
    SlowConvergence { iterations: usize, ratio: f64 },

    #[error("eigenvalue bracket failure: {0}")]
    BracketFailure(String),

    #[error("epsilon continuation does not settle: {0}")]
    NonCauchy(String),

    #[error("dominant eigenvalue is degenerate: {0}")]
    DegenerateDominance(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
