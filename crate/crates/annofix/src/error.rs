use std::fmt;
use std::path::PathBuf;

use annofix_core::metrics::MetricsError;
use annofix_core::pipeline::PipelineError;
use annofix_core::synth::SynthError;

/// Position of a problem inside a file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Offset {
    /// 1-based line of a text file.
    Line(usize),
    /// Byte offset into a binary file.
    Byte(usize),
    Whole,
}

impl fmt::Display for Offset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Offset::Line(n) => write!(f, "line {n}"),
            Offset::Byte(n) => write!(f, "byte {n}"),
            Offset::Whole => Ok(()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{file} {offset}: malformed record: {message}")]
    MalformedRecord {
        file: PathBuf,
        offset: Offset,
        message: String,
    },
    #[error("{file} {offset}: {message}")]
    InvariantViolation {
        file: PathBuf,
        offset: Offset,
        message: String,
    },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for configuration and usage problems, 1 for
    /// everything to do with the data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Usage(_) => 2,
            Error::Synth(SynthError::InvalidConfig(_)) => 2,
            Error::Pipeline(
                PipelineError::Objective(_)
                | PipelineError::Search(_)
                | PipelineError::Association(_),
            ) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
