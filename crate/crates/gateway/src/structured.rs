use serde::de::DeserializeOwned;
use serde_json::Value;

/// A document type the gateway can request and validate.
///
/// `schema` is forwarded to the endpoint as the response format; the reply is
/// then deserialized into `Self` and passed through `check` for constraints a
/// type cannot express (ranges, non-empty strings and so on).
pub trait StructuredOutput: DeserializeOwned {
    fn schema() -> Value;

    fn check(&self) -> Result<(), String> {
        Ok(())
    }
}

/// Pulls the JSON document out of a model reply.
///
/// Models often wrap JSON in Markdown fences or surround it with prose. This
/// strips fences and then takes the span from the first `{` or `[` to the
/// matching last closing bracket. Returns `None` when no such span exists.
pub fn extract_json(text: &str) -> Option<&str> {
    let mut body = text.trim();
    if let Some(rest) = body.strip_prefix("```") {
        let rest = rest.split_once('\n').map_or("", |(_, r)| r);
        body = rest.trim_end().strip_suffix("```").unwrap_or(rest).trim();
    }
    let start = body.find(['{', '['])?;
    let close = if body.as_bytes()[start] == b'{' { '}' } else { ']' };
    let end = body.rfind(close)?;
    (end > start).then(|| &body[start..=end])
}

/// Parses and checks a reply, returning a message suitable for a corrective
/// re-prompt on failure.
pub(crate) fn parse_reply<T: StructuredOutput>(text: &str) -> Result<T, String> {
    let doc = extract_json(text).ok_or_else(|| "the reply contains no JSON document".to_string())?;
    let value: T = serde_json::from_str(doc).map_err(|e| format!("the JSON does not match the schema: {e}"))?;
    value.check().map_err(|e| format!("the JSON violates a constraint: {e}"))?;
    Ok(value)
}
