use thiserror::Error;

use crate::FlowId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parameter `{name}` out of range: {detail}")]
    Parameter { name: &'static str, detail: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("zero throughput spread; z-scores are undefined")]
    DegenerateClass,

    #[error("numeric oracle did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("flow {0} is already registered")]
    DuplicateFlow(FlowId),

    #[error("flow {0} is not registered")]
    UnknownFlow(FlowId),

    #[error("measurement for flow {flow}: {detail}")]
    Measurement { flow: FlowId, detail: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(name: &'static str, detail: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        detail: detail.into(),
    }
}
