use std::collections::BTreeMap;

use mapeval_gateway::{Message, StructuredOutput};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{gateway, Result};
use crate::llm::Llm;
use crate::sampling::FrameSample;
use crate::template::DESCRIBE_FRAME;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub relation: String,
    pub object: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescribedObject {
    pub name: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    #[serde(default)]
    pub relations: Vec<Relation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub frame_id: u32,
    pub narrative: String,
    pub objects: Vec<DescribedObject>,
}

#[derive(Debug, Deserialize)]
struct DescriptionReply {
    narrative: String,
    #[serde(default)]
    objects: Vec<DescribedObject>,
}

impl StructuredOutput for DescriptionReply {
    fn schema() -> Value {
        json!({
            "type": "object",
            "properties": {
                "narrative": {"type": "string"},
                "objects": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "name": {"type": "string"},
                            "attributes": {"type": "object", "additionalProperties": {"type": "string"}},
                            "relations": {
                                "type": "array",
                                "items": {
                                    "type": "object",
                                    "properties": {"relation": {"type": "string"}, "object": {"type": "string"}},
                                    "required": ["relation", "object"]
                                }
                            }
                        },
                        "required": ["name"]
                    }
                }
            },
            "required": ["narrative", "objects"]
        })
    }

    fn check(&self) -> Result<(), String> {
        match self.objects.iter().position(|o| o.name.trim().is_empty()) {
            Some(i) => Err(format!("object {i} has an empty name")),
            None => Ok(()),
        }
    }
}

/// Asks the vision model for a structured description of one frame.
pub fn describe_frame(llm: &Llm, frame: &FrameSample) -> Result<SceneDescription> {
    let prompt = DESCRIBE_FRAME.render(&[("frame_id", &frame.frame_id.to_string())]);
    let req = llm.request(
        vec![Message::user(prompt).with_images([frame.image_path.clone()])],
        llm.temperatures.describe,
    );
    let reply: DescriptionReply = llm
        .gateway
        .complete_structured(&req)
        .map_err(gateway(format!("describing frame {}", frame.frame_id)))?;
    Ok(SceneDescription {
        frame_id: frame.frame_id,
        narrative: reply.narrative,
        objects: reply.objects,
    })
}

/// Describes every frame concurrently; output order follows `frames`.
pub fn describe_frames(llm: &Llm, frames: &[FrameSample]) -> Result<Vec<SceneDescription>> {
    frames.par_iter().map(|f| describe_frame(llm, f)).collect()
}
