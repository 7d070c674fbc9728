use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Input bytes do not follow the expected container layout.
    #[error("format error: {0}")]
    Format(String),

    /// Payload shorter or longer than its header declares.
    #[error("length error: expected {expected} bytes, found {found}")]
    Length { expected: usize, found: usize },

    /// Exhaustive enumeration requested on a machine that is too large.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// An error raised inside one stage of the experiment pipeline.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

/// Attaches a pipeline stage label to errors.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
