use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("action {0} is not a member of the action set")]
    UnknownAction(String),

    #[error("action set must be non-empty")]
    EmptyActionSet,

    #[error("action set contains duplicate identifier {0}")]
    DuplicateAction(String),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("greedy driver exceeded the cap of {cap} segments")]
    SegmentCapExceeded { cap: usize },

    #[error("incremental oracle proposed a non-positive hold duration {0}")]
    NonPositiveHold(f64),

    #[error("unknown {kind} `{id}`")]
    UnknownId { kind: &'static str, id: String },

    #[error("schema violation at `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("{oracle} guard exceeded: size {measured} > limit {limit}")]
    GuardExceeded {
        oracle: &'static str,
        measured: u128,
        limit: u128,
    },

    #[error("rate evaluator does not report breakpoints")]
    MissingBreakpoints,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}
