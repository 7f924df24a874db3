use std::collections::BTreeMap;

use mapeval_core::labels::normalize_label;
use serde::{Deserialize, Serialize};

use crate::describe::SceneDescription;

/// One object after merging all frames that mention it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedObject {
    pub name: String,
    /// Distinct values per attribute, in order of first observation.
    pub attributes: BTreeMap<String, Vec<String>>,
    /// `(relation, other object)` pairs, deduplicated, in order of first observation.
    pub relations: Vec<(String, String)>,
    pub frames: Vec<u32>,
}

impl MergedObject {
    pub fn is_conflicting(&self) -> bool {
        self.attributes.values().any(|v| v.len() > 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnifiedDescription {
    pub objects: Vec<MergedObject>,
    pub narratives: Vec<(u32, String)>,
}

impl UnifiedDescription {
    pub fn object(&self, name: &str) -> Option<&MergedObject> {
        let key = normalize_label(name);
        self.objects.iter().find(|o| o.name == key)
    }

    pub fn frame_ids(&self) -> Vec<u32> {
        self.narratives.iter().map(|(f, _)| *f).collect()
    }

    /// Text handed to the question generator and validator.
    ///
    /// ```text
    /// Objects:
    /// - door, color: white|gray [conflicting: color]; left of: sofa; frames: 0, 10
    /// Narratives:
    /// [frame 0] A living room with ...
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::from("Objects:\n");
        for o in &self.objects {
            out.push_str("- ");
            out.push_str(&o.name);
            for (k, vals) in &o.attributes {
                out.push_str(&format!(", {k}: {}", vals.join("|")));
            }
            let conflicts: Vec<&str> =
                o.attributes.iter().filter(|(_, v)| v.len() > 1).map(|(k, _)| k.as_str()).collect();
            if !conflicts.is_empty() {
                out.push_str(&format!(" [conflicting: {}]", conflicts.join(", ")));
            }
            for (rel, other) in &o.relations {
                out.push_str(&format!("; {rel}: {other}"));
            }
            let frames: Vec<String> = o.frames.iter().map(u32::to_string).collect();
            out.push_str(&format!("; frames: {}\n", frames.join(", ")));
        }
        out.push_str("Narratives:\n");
        for (frame, text) in &self.narratives {
            out.push_str(&format!("[frame {frame}] {}\n", text.trim()));
        }
        out
    }
}

/// Merges per-frame descriptions. Objects are unified by normalized name;
/// differing attribute values are kept side by side as alternatives.
pub fn aggregate_descriptions(descs: &[SceneDescription]) -> UnifiedDescription {
    let mut objects: Vec<MergedObject> = Vec::new();
    for d in descs {
        for obj in &d.objects {
            let name = normalize_label(&obj.name);
            let idx = match objects.iter().position(|o| o.name == name) {
                Some(i) => i,
                None => {
                    objects.push(MergedObject {
                        name,
                        attributes: BTreeMap::new(),
                        relations: Vec::new(),
                        frames: Vec::new(),
                    });
                    objects.len() - 1
                }
            };
            let merged = &mut objects[idx];
            if merged.frames.last() != Some(&d.frame_id) {
                merged.frames.push(d.frame_id);
            }
            for (k, v) in &obj.attributes {
                let key = k.trim().to_lowercase();
                let value = v.trim().to_lowercase();
                let values = merged.attributes.entry(key).or_default();
                if !value.is_empty() && !values.contains(&value) {
                    values.push(value);
                }
            }
            for r in &obj.relations {
                let pair = (r.relation.trim().to_lowercase(), normalize_label(&r.object));
                if !merged.relations.contains(&pair) {
                    merged.relations.push(pair);
                }
            }
        }
    }
    UnifiedDescription {
        objects,
        narratives: descs.iter().map(|d| (d.frame_id, d.narrative.clone())).collect(),
    }
}
