use std::path::PathBuf;

/// Errors raised anywhere in the dating pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("degenerate contour: {0}")]
    DegenerateContour(String),

    #[error("empty histogram: {0}")]
    EmptyHistogram(String),

    #[error("distribution has no accepted probability mass")]
    EmptyMass,

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("year {year} lies outside the grid [{first}, {last}]")]
    OutOfRange { year: f64, first: f64, last: f64 },

    #[error("numeric failure in {context}: {msg}")]
    Numeric { context: String, msg: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by the command line for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn numeric(context: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Numeric {
            context: context.into(),
            msg: msg.into(),
        }
    }

    /// Attach the offending file path to an error.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// Tag an error with the pipeline stage it came from.
    pub fn at(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Numeric { .. } => ErrorKind::Numeric,
            Error::File { source, .. } | Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
