use thiserror::Error;

/// Errors surfaced by every layer of the engine.
///
/// Variants map to the diagnostic categories the CLI reports on exit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NgcError {
    /// Shapes or lengths do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// Operand outside an operation's domain (log of a nonpositive value, division by zero, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// A forward value or gradient became NaN or infinite.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// The caller violated an operation's contract.
    #[error("usage error: {0}")]
    Usage(String),
    /// Internal state is inconsistent (corrupt cache, mismatched layer counts).
    #[error("state error: {0}")]
    State(String),
    /// A retention log does not agree with the trajectory it claims to describe.
    #[error("consistency error: {0}")]
    Consistency(String),
    /// Configuration failed validation.
    #[error("config error: {0}")]
    Config(String),
    /// Reading or writing a file failed.
    #[error("io error: {0}")]
    Io(String),
    /// A checkpoint or serialized record could not be decoded.
    #[error("load error: {0}")]
    Load(String),
}

impl NgcError {
    /// Short category tag used for CLI exit diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            NgcError::Dimension(_) => "dimension",
            NgcError::Domain(_) => "domain",
            NgcError::Numeric(_) => "numeric",
            NgcError::Usage(_) => "usage",
            NgcError::State(_) => "state",
            NgcError::Consistency(_) => "consistency",
            NgcError::Config(_) => "config",
            NgcError::Io(_) => "io",
            NgcError::Load(_) => "load",
        }
    }
}

impl From<std::io::Error> for NgcError {
    fn from(err: std::io::Error) -> Self {
        NgcError::Io(err.to_string())
    }
}

impl From<serde_json::Error> for NgcError {
    fn from(err: serde_json::Error) -> Self {
        NgcError::Load(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, NgcError>;
