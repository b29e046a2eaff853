use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid field `{field}`: {detail}")]
    Field { field: String, detail: String },

    #[error("invariant violated at tick {tick}: {detail}")]
    Invariant { tick: u64, detail: String },

    #[error("non-finite value at tick {tick}: {detail}")]
    NonFinite { tick: u64, detail: String },

    #[error("accounting error: {0}")]
    Accounting(String),

    #[error(transparent)]
    Core(#[from] diffperf_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SimError {
    pub fn field(field: impl Into<String>, detail: impl Into<String>) -> Self {
        SimError::Field {
            field: field.into(),
            detail: detail.into(),
        }
    }

    /// True for errors caused by the input rather than by the run itself.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            SimError::Config(_) | SimError::Field { .. } | SimError::Parse { .. } | SimError::Core(_)
        )
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
