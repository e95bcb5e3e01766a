use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error(
        "enumeration budget exceeded: coset dimension {dimension} > limit {limit} (m={m}, rank={rank})"
    )]
    BudgetExceeded {
        dimension: usize,
        limit: usize,
        m: usize,
        rank: usize,
    },

    #[error("rejection sampling gave up after {trials} trials without a unique witness")]
    TrialLimit { trials: u64 },

    #[error("instance is off-promise (solution count {count})")]
    OffPromise { count: String },

    #[error("formula is unsatisfiable")]
    Unsatisfiable,

    #[error("decider inconsistency at bit {bit}: recovered assignment does not satisfy the instance")]
    DeciderInconsistency { bit: usize },

    #[error("empty training split")]
    EmptyTrainingSet,

    #[error("unknown decoder `{0}`")]
    UnknownDecoder(String),

    #[error("decoder digest mismatch for `{name}`")]
    DigestMismatch { name: String },

    #[error("rank {rank} out of range for C({n},{w})")]
    RankOutOfRange { rank: String, n: usize, w: usize },

    #[error("malformed data: {0}")]
    Malformed(String),
}

impl Error {
    pub fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
