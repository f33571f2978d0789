use std::path::PathBuf;

use thiserror::Error;

/// What went wrong while parsing a data or label file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseIssue {
    Empty,
    NonNumeric(String),
    Ragged { expected: usize, found: usize },
    RowCountMismatch { data_rows: usize, label_rows: usize },
}

impl std::fmt::Display for ParseIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseIssue::Empty => write!(f, "file is empty"),
            ParseIssue::NonNumeric(cell) => write!(f, "non-numeric cell {cell:?}"),
            ParseIssue::Ragged { expected, found } => {
                write!(f, "ragged row: expected {expected} columns, found {found}")
            }
            ParseIssue::RowCountMismatch {
                data_rows,
                label_rows,
            } => write!(
                f,
                "row-count mismatch: {data_rows} data rows but {label_rows} labels"
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}:{line}: {issue}")]
    Parse {
        path: PathBuf,
        line: usize,
        issue: ParseIssue,
    },

    #[error("non-finite gradient at component {index}")]
    NonFiniteGradient { index: usize },

    #[error("iterate became non-finite at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("component {index}: {source}")]
    Component {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps `self` with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage and component wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Component { source, .. } | Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code for the benchmark binary: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::InvalidInput(_) => 2,
            Error::Parse { .. } | Error::Io { .. } => 3,
            Error::NonFiniteGradient { .. }
            | Error::Divergence { .. }
            | Error::Numeric(_)
            | Error::UndefinedMetric(_) => 4,
            Error::Component { .. } | Error::Stage { .. } => unreachable!(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
