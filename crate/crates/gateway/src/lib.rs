//! Chat/vision completion gateway.
//!
//! One [`Gateway`] fronts every LLM/LVLM call of the pipeline. It bounds the
//! number of in-flight requests, retries transient transport failures with
//! exponential backoff, parses structured (JSON) replies with corrective
//! re-prompts, and can record every exchange into a content-addressed store
//! that later replays the run without touching the network.

mod error;
mod gateway;
mod hash;
mod request;
mod store;
mod structured;
pub mod transport;

pub use error::{GatewayError, TransportError};
pub use gateway::{Gateway, GatewayConfig, GatewayStats, Mode, RetryPolicy};
pub use hash::{canonical_request_hash, prepare, ImageData, PreparedRequest};
pub use request::{ChatRequest, ChatResponse, Message, Role, DEFAULT_MODEL_ID};
pub use store::{ReplayStore, StoredExchange};
pub use structured::{extract_json, StructuredOutput};
pub use transport::Transport;

/// Environment variable holding the endpoint API key.
pub const API_KEY_ENV: &str = "MAPEVAL_API_KEY";
