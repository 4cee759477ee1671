use std::path::PathBuf;

use uvhedge_core::Error as CoreError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("report encoding: {0}")]
    Encode(String),

    #[error("self-test failed: {0}")]
    SelfTest(String),
}

pub mod exit {
    pub const CONFIG: i32 = 2;
    pub const CAPABILITY: i32 = 3;
    pub const NUMERICAL: i32 = 4;
    pub const IO: i32 = 5;
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => exit::CONFIG,
            Error::Core(e) => match e.root() {
                CoreError::Capability(_) | CoreError::MissingPartial(_) => exit::CAPABILITY,
                CoreError::InvalidGrid(_) | CoreError::InvalidInstance(_) => exit::CONFIG,
                _ => exit::NUMERICAL,
            },
            Error::Io { .. } | Error::Encode(_) => exit::IO,
            Error::SelfTest(_) => exit::NUMERICAL,
        }
    }
}
