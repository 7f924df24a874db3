use mapeval_gateway::{GatewayError, Message, StructuredOutput};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::answer::SystemAnswer;
use crate::error::{gateway, Error, Result};
use crate::item::QAItem;
use crate::llm::Llm;
use crate::template::JUDGE_ANSWER;
use crate::text::{parse_binary, parse_number};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeMethod {
    Exact,
    LlmJudge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verdict {
    pub qa_id: String,
    pub correct: bool,
    pub method: JudgeMethod,
    /// Judge explanation; always empty for exact judging.
    #[serde(default)]
    pub rationale: String,
    /// The judge never produced a usable verdict.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub judge_failed: bool,
}

#[derive(Debug, Deserialize)]
struct JudgeReply {
    correct: bool,
    #[serde(default)]
    rationale: String,
}

impl StructuredOutput for JudgeReply {
    fn schema() -> Value {
        json!({
            "type": "object",
            "properties": {"correct": {"type": "boolean"}, "rationale": {"type": "string"}},
            "required": ["correct", "rationale"]
        })
    }
}

fn mismatch(item: &QAItem, ans: &SystemAnswer) -> Result<()> {
    if item.qa_id != ans.qa_id {
        return Err(Error::Contract(format!("answer {} paired with question {}", ans.qa_id, item.qa_id)));
    }
    Ok(())
}

/// Direct comparison for yes/no and counting questions.
///
/// Binary answers are reduced to their leading yes/no token; counts are
/// parsed from digits or number words on both sides. Anything that cannot be
/// parsed is incorrect.
pub fn judge_exact(item: &QAItem, ans: &SystemAnswer) -> Result<Verdict> {
    mismatch(item, ans)?;
    if !item.category.is_exact() {
        return Err(Error::Contract(format!("{} is not an exactly judged category", item.category)));
    }
    let correct = if item.category.is_binary() {
        match (parse_binary(&item.gt_answer), parse_binary(&ans.answer)) {
            (Some(gt), Some(a)) => gt == a,
            _ => false,
        }
    } else {
        match (parse_number(&item.gt_answer), parse_number(&ans.answer)) {
            (Some(gt), Some(a)) => gt == a,
            _ => false,
        }
    };
    Ok(Verdict {
        qa_id: item.qa_id.clone(),
        correct,
        method: JudgeMethod::Exact,
        rationale: String::new(),
        judge_failed: false,
    })
}

/// LLM judgment for open-ended categories, always at temperature 0.
///
/// An empty answer is incorrect without consulting the judge. When the judge
/// keeps returning unusable documents the verdict is marked as a judging
/// failure and counted as incorrect.
pub fn judge_semantic(llm: &Llm, item: &QAItem, ans: &SystemAnswer) -> Result<Verdict> {
    mismatch(item, ans)?;
    if item.category.is_exact() {
        return Err(Error::Contract(format!("{} is judged exactly, not by the LLM", item.category)));
    }
    let mut verdict = Verdict {
        qa_id: item.qa_id.clone(),
        correct: false,
        method: JudgeMethod::LlmJudge,
        rationale: String::new(),
        judge_failed: false,
    };
    if ans.answer.trim().is_empty() {
        verdict.rationale = "no answer given".into();
        return Ok(verdict);
    }
    let prompt = JUDGE_ANSWER.render(&[
        ("question", &item.question),
        ("gt_answer", &item.gt_answer),
        ("answer", ans.answer.trim()),
    ]);
    let req = llm.request(vec![Message::user(prompt)], 0.0);
    match llm.gateway.complete_structured::<JudgeReply>(&req) {
        Ok(reply) => {
            verdict.correct = reply.correct;
            verdict.rationale = reply.rationale;
        }
        Err(GatewayError::StructuredOutput { message, .. }) => {
            log::warn!("judge failed on {}: {message}", item.qa_id);
            verdict.judge_failed = true;
            verdict.rationale = format!("judging failure: {message}");
        }
        Err(e) => return Err(gateway(format!("judging {}", item.qa_id))(e)),
    }
    Ok(verdict)
}

/// Routes to exact or LLM judging by category.
pub fn judge(llm: &Llm, item: &QAItem, ans: &SystemAnswer) -> Result<Verdict> {
    if item.category.is_exact() {
        judge_exact(item, ans)
    } else {
        judge_semantic(llm, item, ans)
    }
}
