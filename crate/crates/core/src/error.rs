use std::io;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes or dimensions that do not chain (layer index is 0-based).
    #[error("dimension mismatch at layer {layer}: {reason}")]
    Dimension { layer: usize, reason: String },

    /// Mismatched vector lengths outside of a specific layer.
    #[error("length mismatch: expected {expected}, got {actual}")]
    Length { expected: usize, actual: usize },

    /// Caller supplied an invalid argument or configuration.
    #[error("invalid usage: {0}")]
    Usage(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },

    /// Malformed text input (CSV, model file). Lines are 1-based.
    #[error("{source_name}:{line}: {reason}")]
    Parse {
        source_name: String,
        line: usize,
        reason: String,
    },

    /// Malformed wire record or unexpected server reply.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("cannot connect to {addr}: {source}")]
    Connect { addr: String, source: io::Error },

    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: String, source: io::Error },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(source_name: &str, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_owned(),
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn usage(reason: impl Into<String>) -> Self {
        Error::Usage(reason.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
