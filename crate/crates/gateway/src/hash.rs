use std::path::Path;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::GatewayError;
use crate::request::ChatRequest;

#[derive(Debug, Clone)]
pub struct ImageData {
    pub sha256: String,
    pub mime: &'static str,
    pub bytes: Vec<u8>,
}

/// A request with its images loaded and its canonical form computed.
#[derive(Debug, Clone)]
pub struct PreparedRequest {
    pub request: ChatRequest,
    /// Per message, the images in `image_refs` order.
    pub images: Vec<Vec<ImageData>>,
    pub canonical: Value,
    pub digest: String,
}

fn mime_for(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        Some("ppm") => "image/x-portable-pixmap",
        _ => "application/octet-stream",
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Load images and build the canonical document: sorted keys, text kept
/// verbatim, image paths replaced by the SHA-256 of their bytes.
pub fn prepare(req: &ChatRequest) -> Result<PreparedRequest, GatewayError> {
    let mut images = Vec::with_capacity(req.messages.len());
    let mut messages = Vec::with_capacity(req.messages.len());
    for m in &req.messages {
        let loaded = m
            .image_refs
            .iter()
            .map(|p| {
                let bytes = std::fs::read(p).map_err(|source| GatewayError::Io {
                    path: p.clone(),
                    source,
                })?;
                Ok(ImageData {
                    sha256: sha256_hex(&bytes),
                    mime: mime_for(p),
                    bytes,
                })
            })
            .collect::<Result<Vec<_>, GatewayError>>()?;
        messages.push(json!({
            "role": m.role,
            "text": m.text,
            "images": loaded.iter().map(|i| i.sha256.clone()).collect::<Vec<_>>(),
        }));
        images.push(loaded);
    }
    // serde_json's default map is ordered, so serialization is key-sorted.
    let canonical = json!({
        "messages": messages,
        "model_id": req.model_id,
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
        "response_schema": req.response_schema,
    });
    let digest = sha256_hex(serde_json::to_string(&canonical).expect("json").as_bytes());
    Ok(PreparedRequest {
        request: req.clone(),
        images,
        canonical,
        digest,
    })
}

pub fn canonical_request_hash(req: &ChatRequest) -> Result<String, GatewayError> {
    prepare(req).map(|p| p.digest)
}
