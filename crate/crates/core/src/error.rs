use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` has the wrong kind for this operation")]
    WrongKind(String),
    #[error("class {class} has only {count} rows")]
    ClassTooSmall { class: u8, count: usize },
    #[error("target has a single class")]
    SingleClass,
    #[error("table has no target column")]
    NoTarget,
    #[error("table has no time index column")]
    NoTimeIndex,
    #[error("time index has missing values")]
    MissingTime,
    #[error("non-finite gradient in parameter block `{0}`")]
    NonFiniteGradient(String),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("backward called with a cache that does not match the network")]
    StaleCache,
    #[error("matrix is not positive definite (leading minor {minor})")]
    NotPositiveDefinite { minor: usize },
    #[error("retry budget exhausted: {survivors} of {requested} rows survived the similarity filter")]
    RetryBudgetExhausted { survivors: usize, requested: usize },
    #[error("column `{0}` is constant; the sigma level is undefined")]
    ConstantColumn(String),
    #[error("could not draw a subsample containing both classes after {attempts} attempts")]
    ResampleExhausted { attempts: usize },
    #[error("tail sampling could not reach the requested sigma level")]
    TailUnreachable,
}
