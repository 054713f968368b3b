use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("scenario `{id}`: {source}")]
    Scenario {
        id: String,
        #[source]
        source: bergman_core::Error,
    },
    #[error("duplicate scenario id `{0}`")]
    DuplicateId(String),
    #[error("{0}")]
    Invalid(String),
}
