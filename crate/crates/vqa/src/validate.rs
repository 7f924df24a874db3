use std::collections::HashMap;

use mapeval_gateway::{Message, StructuredOutput};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::aggregate::UnifiedDescription;
use crate::category::QACategory;
use crate::error::{gateway, Error, Result};
use crate::item::{QAItem, QAStatus};
use crate::llm::Llm;
use crate::sampling::FrameSample;
use crate::template::{CONSISTENCY_CHECK, SEMANTIC_DUPLICATES};
use crate::text::normalize_question;

#[derive(Debug, Deserialize)]
struct DuplicateReply {
    duplicate_pairs: Vec<(String, String)>,
}

impl StructuredOutput for DuplicateReply {
    fn schema() -> Value {
        json!({
            "type": "object",
            "properties": {
                "duplicate_pairs": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2}
                }
            },
            "required": ["duplicate_pairs"]
        })
    }
}

#[derive(Debug, Deserialize)]
struct ConsistencyReply {
    valid: bool,
    #[serde(default)]
    reason: String,
}

impl StructuredOutput for ConsistencyReply {
    fn schema() -> Value {
        json!({
            "type": "object",
            "properties": {"valid": {"type": "boolean"}, "reason": {"type": "string"}},
            "required": ["valid", "reason"]
        })
    }

    fn check(&self) -> Result<(), String> {
        if !self.valid && self.reason.trim().is_empty() {
            return Err("a rejection needs a reason".into());
        }
        Ok(())
    }
}

/// Rejects later copies of questions whose normalized text repeats.
pub fn reject_exact_duplicates(items: &mut [QAItem]) {
    let mut first: HashMap<String, String> = HashMap::new();
    for item in items.iter_mut().filter(|i| !i.is_rejected()) {
        let key = normalize_question(&item.question);
        match first.get(&key) {
            Some(id) => item.reject(format!("duplicate of {id}")),
            None => {
                first.insert(key, item.qa_id.clone());
            }
        }
    }
}

fn semantic_duplicates(llm: &Llm, items: &[QAItem], category: QACategory) -> Result<Vec<(String, String)>> {
    let listed: Vec<String> = items
        .iter()
        .filter(|i| i.category == category && !i.is_rejected())
        .map(|i| format!("[{}] {}", i.qa_id, i.question))
        .collect();
    if listed.len() < 2 {
        return Ok(Vec::new());
    }
    let prompt = SEMANTIC_DUPLICATES.render(&[("category", category.as_str()), ("questions", &listed.join("\n"))]);
    let req = llm.request(vec![Message::user(prompt)], llm.temperatures.validate);
    let reply: DuplicateReply = llm
        .gateway
        .complete_structured(&req)
        .map_err(gateway(format!("finding duplicate {category} questions")))?;
    Ok(reply.duplicate_pairs)
}

fn consistency(llm: &Llm, item: &QAItem, description: &str, frames: &[FrameSample]) -> Result<ConsistencyReply> {
    let frame = item
        .source_frames
        .iter()
        .find_map(|id| frames.iter().find(|f| f.frame_id == *id))
        .or_else(|| frames.first());
    let prompt = CONSISTENCY_CHECK.render(&[
        ("qa_id", &item.qa_id),
        ("category", item.category.as_str()),
        ("question", &item.question),
        ("answer", &item.gt_answer),
        ("description", description.trim_end()),
    ]);
    let mut msg = Message::user(prompt);
    if let Some(f) = frame {
        msg = msg.with_images([f.image_path.clone()]);
    }
    let req = llm.request(vec![msg], llm.temperatures.validate);
    llm.gateway
        .complete_structured(&req)
        .map_err(gateway(format!("checking {}", item.qa_id)))
}

/// Filters generated questions in three passes:
///
/// 1. exact duplicates on normalized text,
/// 2. semantic duplicates judged by the LLM, one request per category,
/// 3. a per-question consistency check against the unified description and
///    a frame where the question's objects were seen.
///
/// Survivors become `Validated`; everything else carries a rejection reason.
pub fn validate_questions(
    llm: &Llm,
    items: &[QAItem],
    unified: &UnifiedDescription,
    frames: &[FrameSample],
) -> Result<Vec<QAItem>> {
    let mut items = items.to_vec();
    reject_exact_duplicates(&mut items);

    let pairs: Vec<Vec<(String, String)>> = QACategory::ALL
        .par_iter()
        .map(|&c| semantic_duplicates(llm, &items, c))
        .collect::<Result<_>>()?;
    let position: HashMap<String, usize> = items.iter().enumerate().map(|(i, it)| (it.qa_id.clone(), i)).collect();
    for (category, category_pairs) in QACategory::ALL.iter().zip(pairs) {
        for (a, b) in category_pairs {
            let (Some(&ia), Some(&ib)) = (position.get(&a), position.get(&b)) else {
                log::warn!("ignoring duplicate pair with unknown id: {a}, {b}");
                continue;
            };
            if ia == ib || items[ia].category != *category || items[ib].category != *category {
                continue;
            }
            let (keep, drop) = if ia < ib { (ia, ib) } else { (ib, ia) };
            if !items[keep].is_rejected() && !items[drop].is_rejected() {
                let kept = items[keep].qa_id.clone();
                items[drop].reject(format!("semantic duplicate of {kept}"));
            }
        }
    }

    let description = unified.to_text();
    let verdicts: Vec<Option<ConsistencyReply>> = items
        .par_iter()
        .map(|item| {
            if item.is_rejected() {
                Ok(None)
            } else {
                consistency(llm, item, &description, frames).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    for (item, verdict) in items.iter_mut().zip(verdicts) {
        match verdict {
            None => {}
            Some(v) if v.valid => {
                item.status = QAStatus::Validated;
                if let Err(e) = item.check() {
                    return Err(Error::Contract(e));
                }
            }
            Some(v) => item.reject(v.reason.trim()),
        }
    }
    Ok(items)
}
