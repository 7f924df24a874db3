use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// Object-level graph emitted by a mapping method: detected objects plus
/// typed relations between them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneGraph {
    #[serde(default)]
    pub nodes: Vec<SceneNode>,
    #[serde(default)]
    pub edges: Vec<SceneEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneNode {
    #[serde(alias = "id", deserialize_with = "id_string")]
    pub node_id: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, serde_json::Value>,
    /// Object center in meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centroid: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEdge {
    #[serde(deserialize_with = "id_string")]
    pub source: String,
    #[serde(deserialize_with = "id_string")]
    pub target: String,
    pub relation: String,
}

// Exporters disagree on whether ids are strings or integers.
fn id_string<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        Text(String),
        Int(i64),
    }
    Ok(match Id::deserialize(de)? {
        Id::Text(s) => s,
        Id::Int(i) => i.to_string(),
    })
}

impl SceneGraph {
    pub fn node(&self, node_id: &str) -> Option<&SceneNode> {
        self.nodes.iter().find(|n| n.node_id == node_id)
    }

    /// Check id uniqueness and that every edge endpoint exists.
    pub fn check(&self) -> std::result::Result<(), String> {
        let mut ids = HashSet::new();
        for node in &self.nodes {
            if !ids.insert(node.node_id.as_str()) {
                return Err(format!("duplicate node id `{}`", node.node_id));
            }
        }
        for edge in &self.edges {
            for end in [&edge.source, &edge.target] {
                if !ids.contains(end.as_str()) {
                    return Err(format!(
                        "edge `{}` -[{}]-> `{}` references unknown node `{end}`",
                        edge.source, edge.relation, edge.target
                    ));
                }
            }
        }
        Ok(())
    }

    /// Plain-text rendering used as LLM context: one line per object, then
    /// one line per relation. Node and edge order is preserved.
    pub fn to_prompt_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("Objects ({}):\n", self.nodes.len()));
        for node in &self.nodes {
            out.push_str(&format!("- [{}] {}", node.node_id, node.label));
            let mut details = Vec::new();
            if let Some(caption) = &node.caption {
                details.push(format!("caption: {caption}"));
            }
            for (k, v) in &node.attributes {
                let v = match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                details.push(format!("{k}: {v}"));
            }
            if let Some([x, y, z]) = node.centroid {
                details.push(format!("centroid: ({x:.2}, {y:.2}, {z:.2})"));
            }
            if !details.is_empty() {
                out.push_str(&format!(" ({})", details.join("; ")));
            }
            out.push('\n');
        }
        out.push_str(&format!("Relations ({}):\n", self.edges.len()));
        for edge in &self.edges {
            out.push_str(&format!("- [{}] {} [{}]\n", edge.source, edge.relation, edge.target));
        }
        out
    }
}

pub fn parse_scene_graph(text: &str, origin: &Path) -> Result<SceneGraph> {
    let graph: SceneGraph = serde_json::from_str(text).map_err(|e| {
        if e.is_data() {
            Error::schema(origin, e.to_string())
        } else {
            Error::Parse {
                path: origin.to_path_buf(),
                line: Some(e.line()),
                message: e.to_string(),
            }
        }
    })?;
    graph.check().map_err(|m| Error::schema(origin, m))?;
    Ok(graph)
}

pub fn load_scene_graph(path: impl AsRef<Path>) -> Result<SceneGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene_graph(&text, path)
}
