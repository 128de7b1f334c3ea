use std::path::PathBuf;

use thiserror::Error;

use crate::domain::DialogueState;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state {0} is not terminal")]
    NonTerminalState(DialogueState),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid probabilities for {context}: {message}")]
    Validation { context: String, message: String },

    #[error("user `{user}` is missing the ({engagement}, {difficulty}) row")]
    MissingRow {
        user: String,
        engagement: String,
        difficulty: String,
    },

    #[error("duplicate row for user `{user}` ({engagement}, {difficulty}) at line {line}")]
    DuplicateRow {
        user: String,
        engagement: String,
        difficulty: String,
        line: u64,
    },

    #[error("unknown user `{0}`")]
    UnknownUser(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
