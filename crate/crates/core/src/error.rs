use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid label {label} for label space of size {k}")]
    InvalidLabel { label: usize, k: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty label tuple")]
    EmptyTuple,

    #[error("aggregate {0} is not accepted by this surrogate")]
    UnsupportedAggregate(&'static str),

    #[error("non-unique Bayes label at support points {0:?}")]
    NonUniqueBayes(Vec<u64>),

    #[error("not identifying: {0}")]
    NotIdentifying(String),

    #[error("search too large ({points} grid points > {limit}); use a smaller instance")]
    SearchTooLarge { points: f64, limit: f64 },

    #[error("exact enumeration too large ({outcomes} outcomes > {limit}); use Monte Carlo mode")]
    EnumerationTooLarge { outcomes: f64, limit: f64 },

    #[error("non-finite objective at iteration {iter}: {iterate:?}")]
    NonFinite { iter: usize, iterate: Vec<f64> },

    #[error("linear program is {0}")]
    Lp(&'static str),
}
