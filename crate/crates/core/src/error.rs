use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("{quantity} = {value} outside the model domain {domain}")]
    Domain {
        quantity: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("user {user} has an all-zero direct channel")]
    ZeroChannel { user: usize },

    #[error("search space of {count} evaluations exceeds the budget of {budget}")]
    BudgetExceeded { count: u128, budget: u64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("format version mismatch in {file}: found {found}, expected {expected}")]
    VersionMismatch {
        file: String,
        found: u32,
        expected: u32,
    },

    #[error("truncated data in {file}: {detail}")]
    Truncated { file: String, detail: String },

    #[error("checksum mismatch in {file}: manifest {expected}, computed {found}")]
    Checksum {
        file: String,
        expected: String,
        found: String,
    },

    #[error("corrupt data in {file}: {detail}")]
    Corrupt { file: String, detail: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
