use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("weight mismatch: {0}")]
    WeightShape(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Process exit status: 2 bad input, 3 bad config or weights, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::InvalidManifest(_) | Error::Wav(_) | Error::Io(_) => 2,
            Error::InvalidConfig(_) | Error::WeightShape(_) | Error::Json(_) | Error::Toml(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid_input(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn invalid_config(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
