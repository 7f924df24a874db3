use mapeval_core::labels::normalize_label;
use mapeval_core::ConditionKind;
use mapeval_gateway::{Message, StructuredOutput};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{json, Value};

use crate::aggregate::UnifiedDescription;
use crate::category::{CategoryQuota, QACategory};
use crate::error::{gateway, Result};
use crate::item::{qa_id, QAItem, QAStatus};
use crate::llm::Llm;
use crate::template::{guidance, GENERATE_QUESTIONS};
use crate::text::{format_number, parse_binary, parse_number};

#[derive(Debug, Clone)]
pub struct GenerationParams {
    pub scene_id: String,
    pub condition: ConditionKind,
    pub quotas: CategoryQuota,
    pub n_total: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub category: QACategory,
    pub target: usize,
    pub produced: usize,
    /// Candidates dropped because their answer had the wrong shape.
    pub malformed: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub categories: Vec<CategoryCount>,
}

impl GenerationSummary {
    /// Categories where fewer valid questions came back than requested.
    pub fn shortfalls(&self) -> impl Iterator<Item = &CategoryCount> {
        self.categories.iter().filter(|c| c.produced < c.target)
    }
}

#[derive(Debug, Deserialize)]
struct GenerateReply {
    questions: Vec<Candidate>,
}

#[derive(Debug, Deserialize)]
struct Candidate {
    question: String,
    #[serde(deserialize_with = "scalar_text")]
    answer: String,
    #[serde(default)]
    objects: Vec<String>,
}

/// Accepts `"3"`, `3` or `true` alike; models are loose about answer types.
fn scalar_text<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    match Value::deserialize(d)? {
        Value::String(s) => Ok(s),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(if b { "yes" } else { "no" }.to_string()),
        other => Err(serde::de::Error::custom(format!("answer must be text, got {other}"))),
    }
}

impl StructuredOutput for GenerateReply {
    fn schema() -> Value {
        json!({
            "type": "object",
            "properties": {
                "questions": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "question": {"type": "string"},
                            "answer": {"type": "string"},
                            "objects": {"type": "array", "items": {"type": "string"}}
                        },
                        "required": ["question", "answer", "objects"]
                    }
                }
            },
            "required": ["questions"]
        })
    }
}

/// Normalizes a candidate's answer for its category, or `None` when the
/// answer does not have the required shape.
fn shape_answer(category: QACategory, answer: &str, objects: &[String], unified: &UnifiedDescription) -> Option<String> {
    let answer = answer.trim();
    match category {
        QACategory::BinaryExistence => {
            // Existence questions probe objects that are not in the scene.
            let absent = objects.iter().all(|o| unified.object(o).is_none());
            (parse_binary(answer) == Some(false) && absent).then(|| "no".to_string())
        }
        c if c.is_binary() => parse_binary(answer).map(|b| if b { "yes" } else { "no" }.to_string()),
        QACategory::Measurement => parse_number(answer).filter(|n| *n >= 0.0).map(format_number),
        _ => (!answer.is_empty()).then(|| answer.to_string()),
    }
}

fn generate_category(
    llm: &Llm,
    unified: &UnifiedDescription,
    description: &str,
    params: &GenerationParams,
    category: QACategory,
    target: usize,
) -> Result<(Vec<QAItem>, CategoryCount)> {
    let mut count = CategoryCount {
        category,
        target,
        produced: 0,
        malformed: 0,
    };
    if target == 0 {
        return Ok((Vec::new(), count));
    }
    let prompt = GENERATE_QUESTIONS.render(&[
        ("category", category.as_str()),
        ("count", &target.to_string()),
        ("seed", &params.seed.to_string()),
        ("guidance", guidance(category).text.trim_end()),
        ("description", description.trim_end()),
    ]);
    let req = llm.request(vec![Message::user(prompt)], llm.temperatures.generate);
    let reply: GenerateReply = llm
        .gateway
        .complete_structured(&req)
        .map_err(gateway(format!("generating {category} questions")))?;

    let mut items = Vec::with_capacity(target);
    for cand in reply.questions {
        if items.len() == target {
            break;
        }
        let mut objects: Vec<String> = Vec::new();
        for o in &cand.objects {
            let n = normalize_label(o);
            if !n.is_empty() && !objects.contains(&n) {
                objects.push(n);
            }
        }
        let question = cand.question.trim();
        let answer = shape_answer(category, &cand.answer, &objects, unified);
        let (false, Some(gt_answer)) = (question.is_empty(), answer) else {
            count.malformed += 1;
            continue;
        };
        let mut source_frames: Vec<u32> = objects
            .iter()
            .filter_map(|o| unified.object(o))
            .flat_map(|o| o.frames.iter().copied())
            .collect();
        source_frames.sort_unstable();
        source_frames.dedup();
        items.push(QAItem {
            qa_id: qa_id(&params.scene_id, params.condition.as_str(), category, items.len()),
            category,
            question: question.to_string(),
            gt_answer,
            source_frames,
            referenced_objects: objects,
            status: QAStatus::Generated,
        });
    }
    count.produced = items.len();
    if count.produced < target {
        log::warn!(
            "{}/{}: {category} produced {} of {target} questions",
            params.scene_id,
            params.condition,
            count.produced
        );
    }
    Ok((items, count))
}

/// Generates questions for every category with one request per category.
///
/// Per-category targets come from [`CategoryQuota::targets`]. Extra
/// candidates are cut, malformed ones dropped, and any shortfall is reported
/// in the summary rather than treated as an error.
pub fn generate_questions(
    llm: &Llm,
    unified: &UnifiedDescription,
    params: &GenerationParams,
) -> Result<(Vec<QAItem>, GenerationSummary)> {
    let targets = params.quotas.targets(params.n_total);
    let description = unified.to_text();
    let per_category: Vec<(Vec<QAItem>, CategoryCount)> = QACategory::ALL
        .par_iter()
        .map(|&c| generate_category(llm, unified, &description, params, c, targets[c.index()]))
        .collect::<Result<_>>()?;
    let mut items = Vec::new();
    let mut summary = GenerationSummary::default();
    for (mut batch, count) in per_category {
        items.append(&mut batch);
        summary.categories.push(count);
    }
    Ok((items, summary))
}
