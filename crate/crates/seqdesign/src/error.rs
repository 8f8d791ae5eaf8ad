use thiserror::Error;

/// Errors produced by population construction, experiment simulation,
/// estimation, and the Monte Carlo engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("population is empty")]
    EmptyPopulation,

    #[error("population vectors have mismatched lengths: y0 has {y0_len}, y1 has {y1_len}")]
    LengthMismatch { y0_len: usize, y1_len: usize },

    #[error("population contains a non-finite outcome at index {index}")]
    NonFiniteOutcome { index: usize },

    #[error("outcome at index {index} has |y| = {value} exceeding the declared bound M = {bound}")]
    OutcomeBoundExceeded { index: usize, value: f64, bound: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("rejection sampler exceeded {cap} attempts for a single draw")]
    RejectionCapExceeded { cap: usize },

    #[error("design state is inconsistent: {0}")]
    InvalidDesignState(String),

    #[error("inclusion probability at index {index} is {value}, outside (0,1)")]
    DegenerateProbability { index: usize, value: f64 },

    #[error("trace is inconsistent: {0}")]
    InvalidTrace(String),

    #[error("path enumeration supports at most {max} units, got {got}")]
    EnumerationTooLarge { max: usize, got: usize },

    #[error("trace does not match population: {0}")]
    TracePopulationMismatch(String),

    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),

    #[error("replication {index} failed: {source}")]
    ReplicationFailed {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error in {context}: {reason}")]
    Parse { context: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
