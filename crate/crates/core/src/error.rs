use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("invalid neighborhood system: {0}")]
    InvalidSystem(String),
    #[error("no pair cover A_({i},{j}) for j in A_i (1-based)", i = .0 + 1, j = .1 + 1)]
    MissingPairCover(usize, usize),
    #[error("variance is zero; the normalized statistic is undefined")]
    DegenerateVariance,
    #[error("kernel projection is degenerate (sigma_1 = {0:e})")]
    DegenerateKernel(f64),
    #[error("block of size {size} is smaller than the kernel degree {m}")]
    BlockTooSmall { size: usize, m: usize },
    #[error("the constrained index set is empty")]
    EmptyIndexSet,
    #[error("index set of size {size} exceeds the cap {cap}")]
    GraphTooLarge { size: u128, cap: u128 },
    #[error("outcome space of size {size} exceeds the enumeration cap {cap}")]
    EnumerationCapExceeded { size: u128, cap: u128 },
    #[error("nested sums need more than {budget} term visits")]
    ComplexityCapExceeded { budget: u64 },
    #[error("test function {name} violates |f| <= 1 or |f'| <= 1")]
    InvalidTestFunction { name: String },
    #[error("{rejected} of {reps} replications rejected (V = 0), above the {threshold} limit")]
    ExcessRejections { rejected: u64, reps: u64, threshold: f64 },
    #[error("rate fit needs at least 3 points with positive distance")]
    DegeneratePoints,
    #[error("summary and bound grids differ")]
    GridMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error: {0}")]
    Config(String),
}
