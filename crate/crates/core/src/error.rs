use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tileset: {0}")]
    TileSet(String),

    #[error("invalid board: {0}")]
    Board(String),

    #[error("rule `{rule}`: {msg}")]
    Rule { rule: String, msg: String },

    #[error("invalid genome: {0}")]
    Genome(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A precondition of an operation was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid archive: {0}")]
    Archive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn rule(rule: &str, msg: impl Into<String>) -> Self {
        Error::Rule { rule: rule.to_string(), msg: msg.into() }
    }

    /// True for errors caused by bad input data rather than the filesystem.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
