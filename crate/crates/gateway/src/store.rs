use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::GatewayError;
use crate::request::ChatResponse;

/// One recorded exchange, stored as `<digest>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredExchange {
    pub request: serde_json::Value,
    pub response: StoredResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Content-addressed directory of recorded request/response pairs.
#[derive(Debug, Clone)]
pub struct ReplayStore {
    dir: PathBuf,
}

impl ReplayStore {
    pub fn open(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_of(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.json"))
    }

    pub fn get(&self, digest: &str) -> Result<Option<ChatResponse>, GatewayError> {
        let path = self.path_of(digest);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(GatewayError::Store(format!("{}: {e}", path.display()))),
        };
        let ex: StoredExchange =
            serde_json::from_str(&text).map_err(|e| GatewayError::Store(format!("{}: {e}", path.display())))?;
        Ok(Some(ChatResponse {
            text: ex.response.text,
            prompt_tokens: ex.response.prompt_tokens,
            completion_tokens: ex.response.completion_tokens,
            latency: 0.0,
        }))
    }

    pub fn put(&self, digest: &str, canonical: &serde_json::Value, resp: &ChatResponse) -> Result<(), GatewayError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| GatewayError::Store(format!("{}: {e}", self.dir.display())))?;
        let ex = StoredExchange {
            request: canonical.clone(),
            response: StoredResponse {
                text: resp.text.clone(),
                prompt_tokens: resp.prompt_tokens,
                completion_tokens: resp.completion_tokens,
            },
        };
        let mut body = serde_json::to_string_pretty(&ex).expect("json");
        body.push('\n');
        // Write-then-rename so concurrent readers never see half a file.
        let path = self.path_of(digest);
        static SEQ: AtomicU64 = AtomicU64::new(0);
        let seq = SEQ.fetch_add(1, Ordering::Relaxed);
        let tmp = self.dir.join(format!(".{digest}.{}.{seq}.tmp", std::process::id()));
        std::fs::write(&tmp, body)
            .and_then(|_| std::fs::rename(&tmp, &path))
            .map_err(|e| GatewayError::Store(format!("{}: {e}", path.display())))
    }

    pub fn len(&self) -> usize {
        std::fs::read_dir(&self.dir)
            .map(|rd| {
                rd.filter_map(Result::ok)
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
