use mapeval_core::ingest::SceneGraph;
use mapeval_gateway::Message;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{gateway, Result};
use crate::item::QAItem;
use crate::llm::Llm;
use crate::template::ANSWER_SCENE_GRAPH;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsweredBy {
    /// The system under test answered the question itself.
    Direct,
    /// An LLM answered from the system's scene graph.
    SceneGraphLlm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemAnswer {
    pub qa_id: String,
    pub answer: String,
    pub answered_by: AnsweredBy,
}

/// Answers one question from the scene graph. The reply is kept verbatim.
pub fn answer_from_scene_graph(llm: &Llm, graph: &SceneGraph, item: &QAItem) -> Result<SystemAnswer> {
    let prompt = ANSWER_SCENE_GRAPH.render(&[("scene_graph", &graph.to_prompt_text()), ("question", &item.question)]);
    let req = llm.request(vec![Message::user(prompt)], llm.temperatures.answer);
    let resp = llm
        .gateway
        .complete(&req)
        .map_err(gateway(format!("answering {}", item.qa_id)))?;
    Ok(SystemAnswer {
        qa_id: item.qa_id.clone(),
        answer: resp.text,
        answered_by: AnsweredBy::SceneGraphLlm,
    })
}

/// Answers every validated item concurrently, in input order.
pub fn answer_all(llm: &Llm, graph: &SceneGraph, items: &[QAItem]) -> Result<Vec<SystemAnswer>> {
    items
        .par_iter()
        .filter(|i| i.is_validated())
        .map(|i| answer_from_scene_graph(llm, graph, i))
        .collect()
}
