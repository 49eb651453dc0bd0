use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("unknown event `{0}`")]
    UnknownEvent(String),

    #[error("duplicate state `{0}`")]
    DuplicateState(String),

    #[error("nondeterministic transition: state `{state}` already has a transition on `{event}`")]
    Nondeterministic { state: String, event: String },

    #[error("conflicting attributes for shared event `{0}`")]
    AttributeConflict(String),

    #[error("state limit of {limit} exceeded")]
    ResourceLimit { limit: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("vulnerability specification: {0}")]
    Spec(String),

    #[error("operation not supported in {0} mode")]
    UnsupportedMode(String),

    #[error("event `{event}` is not enabled; enabled events: [{}]", enabled.join(", "))]
    IllegalEvent { event: String, enabled: Vec<String> },

    #[error("specification is not observable: {0}")]
    RealizationRefused(String),

    #[error("model file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
