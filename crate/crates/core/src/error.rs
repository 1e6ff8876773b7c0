use std::path::PathBuf;

/// Errors raised anywhere in the library. Each variant is one reportable
/// category; the CLI prints the category name before the message.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("payload size mismatch: expected {expected} bytes, found {found}")]
    PayloadSize { expected: usize, found: usize },

    #[error("non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("wavelengths are not strictly increasing at index {0}")]
    NonIncreasingWavelengths(usize),

    #[error("label value {value} at pixel {index} is not one of 0, 1, 255")]
    LabelRange { index: usize, value: u8 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("class {0} is missing")]
    MissingClass(u8),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("config not found: {0}")]
    ConfigNotFound(PathBuf),

    #[error("patch {patch} of image `{image}`: {source}")]
    Patch {
        image: String,
        patch: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Short machine-friendly category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MalformedHeader(_) => "malformed header",
            Error::PayloadSize { .. } => "payload size",
            Error::NonFinite(_) => "non-finite",
            Error::NonIncreasingWavelengths(_) => "wavelengths",
            Error::LabelRange { .. } => "label range",
            Error::Dimension(_) => "dimension",
            Error::InvalidParameter(_) => "invalid parameter",
            Error::MissingClass(_) => "missing class",
            Error::Singular(_) => "singular",
            Error::Empty(_) => "empty",
            Error::Config(_) => "config",
            Error::ConfigNotFound(_) => "config not found",
            Error::Patch { source, .. } => source.category(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
