//! Wire transports. Each dialect implements [`Transport`]; tests use the
//! in-process stubs at the bottom of this module.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::TransportError;
use crate::hash::PreparedRequest;
use crate::request::{ChatResponse, Role};

/// Sends one prepared request. Implementations must tolerate concurrent calls.
pub trait Transport: Send + Sync {
    fn send(&self, req: &PreparedRequest) -> Result<ChatResponse, TransportError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dialect {
    /// `POST /chat/completions` with `choices[0].message.content` replies.
    /// Also served by Gemini's OpenAI-compatible endpoint.
    #[default]
    OpenaiChat,
}

/// Chat-completions over HTTP.
pub struct OpenAiChatTransport {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl std::fmt::Debug for OpenAiChatTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpenAiChatTransport")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl OpenAiChatTransport {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            api_key,
            agent,
        }
    }

    /// Request body in the chat-completions dialect.
    pub fn body(req: &PreparedRequest) -> Value {
        let b64 = base64::engine::general_purpose::STANDARD;
        let messages: Vec<Value> = req
            .request
            .messages
            .iter()
            .zip(&req.images)
            .map(|(m, images)| {
                let role = match m.role {
                    Role::System => "system",
                    Role::User => "user",
                };
                if images.is_empty() {
                    return json!({ "role": role, "content": m.text });
                }
                let mut parts = vec![json!({ "type": "text", "text": m.text })];
                parts.extend(images.iter().map(|img| {
                    json!({
                        "type": "image_url",
                        "image_url": { "url": format!("data:{};base64,{}", img.mime, b64.encode(&img.bytes)) }
                    })
                }));
                json!({ "role": role, "content": parts })
            })
            .collect();
        let mut body = json!({
            "model": req.request.model_id,
            "messages": messages,
            "temperature": req.request.temperature,
            "max_tokens": req.request.max_tokens,
        });
        if let Some(schema) = &req.request.response_schema {
            body["response_format"] = json!({
                "type": "json_schema",
                "json_schema": { "name": "response", "schema": schema },
            });
        }
        body
    }

    fn parse_reply(text: &str, latency: f64) -> Result<ChatResponse, TransportError> {
        let v: Value = serde_json::from_str(text).map_err(|e| TransportError::Decode(e.to_string()))?;
        let content = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| TransportError::Decode("missing choices[0].message.content".into()))?;
        Ok(ChatResponse {
            text: content.to_string(),
            prompt_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
            latency,
        })
    }
}

impl Transport for OpenAiChatTransport {
    fn send(&self, req: &PreparedRequest) -> Result<ChatResponse, TransportError> {
        let started = Instant::now();
        let mut call = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let payload = serde_json::to_vec(&Self::body(req)).expect("json");
        let mut resp = call
            .send(&payload[..])
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let code = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        if !(200..300).contains(&code) {
            return Err(TransportError::Status { code, body: text });
        }
        Self::parse_reply(&text, started.elapsed().as_secs_f64())
    }
}

/// Panics-free transport that fails every call and counts attempts. Used to
/// prove replay mode never reaches the network.
#[derive(Debug, Default)]
pub struct FailOnUse {
    calls: AtomicUsize,
}

impl FailOnUse {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for FailOnUse {
    fn send(&self, _req: &PreparedRequest) -> Result<ChatResponse, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Err(TransportError::Other("network use is forbidden in this mode".into()))
    }
}

/// Returns queued results in order; errors once the script runs out.
#[derive(Debug, Default)]
pub struct ScriptedTransport {
    script: Mutex<VecDeque<Result<String, TransportError>>>,
    calls: AtomicUsize,
}

impl ScriptedTransport {
    pub fn new(script: impl IntoIterator<Item = Result<String, TransportError>>) -> Self {
        Self {
            script: Mutex::new(script.into_iter().collect()),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn replies<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        Self::new(texts.into_iter().map(|t| Ok(t.into())))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for ScriptedTransport {
    fn send(&self, _req: &PreparedRequest) -> Result<ChatResponse, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let next = self.script.lock().unwrap().pop_front();
        match next {
            Some(Ok(text)) => Ok(ChatResponse::text(text)),
            Some(Err(e)) => Err(e),
            None => Err(TransportError::Other("script exhausted".into())),
        }
    }
}

/// Closure-backed transport for rule-based fakes.
pub struct FnTransport<F>(pub F);

impl<F> Transport for FnTransport<F>
where
    F: Fn(&PreparedRequest) -> Result<ChatResponse, TransportError> + Send + Sync,
{
    fn send(&self, req: &PreparedRequest) -> Result<ChatResponse, TransportError> {
        (self.0)(req)
    }
}
