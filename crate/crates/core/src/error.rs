use alloc::string::String;

/// Failures raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("ridge block is rank deficient and lambda is zero")]
    SingularBlock,
    #[error("block has no nonzero singular values")]
    EmptyBlock,
    #[error("target df {target} is infeasible for {learner} (rank {rank})")]
    InfeasibleDf {
        learner: String,
        target: f64,
        rank: usize,
    },
    #[error("invalid column index {0}")]
    InvalidColumn(usize),
    #[error("column indices must be strictly increasing")]
    UnsortedColumns,
    #[error("outcome column `{0}` not found")]
    MissingOutcome(String),
    #[error("column `{column}` has a non-numeric value at row {row}")]
    NonNumericColumn { column: String, row: usize },
    #[error("column `{0}` is constant")]
    ConstantColumn(String),
    #[error("variable `{0}` in the group table does not exist in the data")]
    UnknownVariable(String),
    #[error("variable `{0}` is assigned to more than one group")]
    OverlappingGroups(String),
    #[error("binomial outcome must have exactly two levels, found {0}")]
    NotBinary(usize),
    #[error("no base-learners to select from")]
    NoLearners,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("iteration {requested} is out of range 0..={available}")]
    OutOfRange { requested: usize, available: usize },
    #[error("model has no boosting iterations")]
    EmptyModel,
    #[error("resampling leaves no training or no held-out observations (fold or replicate {0})")]
    FoldTooSmall(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
