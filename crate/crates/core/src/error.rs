use thiserror::Error;

/// Errors raised by the spectral laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("generator failed at n = {n}: {source}")]
    Generator {
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("family member m = {m} could not be verified as Cauchy within the probe budget")]
    NotVerifiablyCauchy { m: usize },

    #[error("symbol evaluation failed at {failed} of {total} sample nodes")]
    SampleFailure { failed: usize, total: usize },

    #[error("evaluation failed at node {index} (x = {x})")]
    Evaluation { index: usize, x: f64 },

    #[error("singular value iteration did not converge")]
    NoConvergence,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn at_order(n: usize, source: Error) -> Self {
        match source {
            // keep the innermost order
            e @ Error::Generator { .. } => e,
            e => Error::Generator {
                n,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
