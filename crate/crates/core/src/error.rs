use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("empty data: {0}")]
    EmptyData(&'static str),

    /// A gamma factor would require inverting a zero denominator.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Loss of definiteness or an indefinite matrix where a PSD one is required.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("dynamics diverged at iteration {iteration}{}", .sample.map(|s| format!(" (sample {s})")).unwrap_or_default())]
    Divergence {
        iteration: usize,
        sample: Option<usize>,
    },

    #[error("infeasible sampler: acceptance rate {rate:e} below threshold")]
    InfeasibleSampler { rate: f64 },

    #[error("degenerate mixing matrix after {tries} tries")]
    DegenerateMixing { tries: usize },

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attach a sample index to a divergence error.
    pub fn at_sample(self, index: usize) -> Self {
        match self {
            Error::Divergence { iteration, .. } => Error::Divergence {
                iteration,
                sample: Some(index),
            },
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize, context: &'static str) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            expected,
            actual,
            context,
        });
    }
    Ok(())
}
