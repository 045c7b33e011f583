use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("unsupported format: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("window starting at sample {start_sample} does not fit: {message}")]
    Range {
        start_sample: usize,
        message: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("eigenvalue threshold selects {found} components but the model needs {expected}; spectrum: {spectrum:?}")]
    AmbiguousModel {
        expected: usize,
        found: usize,
        spectrum: Vec<f64>,
    },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("generation diverged at integration step {step}: {message}")]
    Generation { step: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable category used by the command line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Unsupported(_) => "unsupported",
            Error::Config(_) => "config",
            Error::Range { .. } => "range",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Numerical(_) | Error::AmbiguousModel { .. } => "numerical",
            Error::Data(_) => "data",
            Error::Generation { .. } => "generation",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
