use thiserror::Error;

/// Errors raised while validating, stepping, or post-processing a simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    Invalid(String),

    #[error("CFL ratio v*dt/dx = {ratio} is not below the admissible bound {bound}")]
    Cfl { ratio: f64, bound: f64 },

    #[error("scenario file line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-physical state: isotherm denominator {denominator} <= 0")]
    NonPhysical { denominator: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular or ill-conditioned pivot block at node {node}")]
    SingularBlock { node: usize },

    #[error("inner iteration did not converge: {iterations} iterations, residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("empty record: {0}")]
    EmptyRecord(String),

    #[error("reference unavailable: {0}")]
    ReferenceUnavailable(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::Step { .. } => e,
            e => Error::Step {
                step,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, looking through step wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for errors caused by a rejected configuration rather than a solver failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self.root(),
            Error::Invalid(_) | Error::Cfl { .. } | Error::Parse { .. } | Error::Dimension(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
