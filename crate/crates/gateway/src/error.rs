use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum TransportError {
    #[error("HTTP {code}: {body}")]
    Status { code: u16, body: String },
    #[error("network: {0}")]
    Network(String),
    #[error("malformed response: {0}")]
    Decode(String),
    #[error("{0}")]
    Other(String),
}

impl TransportError {
    /// Rate limiting, server-side failures and connection problems.
    pub fn is_transient(&self) -> bool {
        match self {
            TransportError::Status { code, .. } => *code == 408 || *code == 429 || *code >= 500,
            TransportError::Network(_) => true,
            TransportError::Decode(_) | TransportError::Other(_) => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("cannot read image {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("replay store has no response for request {digest}")]
    ReplayMiss { digest: String },

    #[error("gave up after {attempts} attempt(s): {last}")]
    Exhausted { attempts: u32, last: TransportError },

    #[error("transport error: {0}")]
    Transport(TransportError),

    #[error("structured output rejected after {attempts} attempt(s): {message}")]
    StructuredOutput {
        attempts: u32,
        message: String,
        raw: String,
    },

    #[error("replay store: {0}")]
    Store(String),

    #[error("gateway misconfigured: {0}")]
    Config(String),
}
