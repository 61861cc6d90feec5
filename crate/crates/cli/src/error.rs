use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// Malformed JSON or a value of the wrong shape.
    #[error("{}{message}", at(pointer))]
    Parse { pointer: String, message: String },

    /// Well-formed input that violates a model invariant.
    #[error("{}{message}", at(pointer))]
    Invalid { pointer: String, message: String },

    #[error(transparent)]
    Core(#[from] qhist_core::Error),
}

fn at(pointer: &str) -> String {
    if pointer.is_empty() {
        String::new()
    } else {
        format!("{pointer}: ")
    }
}

impl CliError {
    pub fn invalid(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Invalid {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    pub fn parse(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Parse {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        use qhist_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Parse { .. } => 2,
            CliError::Invalid { .. } => 3,
            CliError::Core(e) => match e {
                E::Incompatible { .. } => 4,
                E::NullConditioning { .. } => 5,
                E::Inconsistent(_) => 6,
                _ => 3,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
