//! Prompt templates bundled with the crate.
//!
//! Templates are plain text with `{{name}}` placeholders. Their SHA-256
//! digests are written into every stored QA set and verdict file so a result
//! can be traced to the exact prompt wording that produced it.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::category::QACategory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Template {
    pub name: &'static str,
    pub text: &'static str,
}

pub const DESCRIBE_FRAME: Template = Template {
    name: "describe_frame",
    text: include_str!("../templates/describe_frame.txt"),
};
pub const GENERATE_QUESTIONS: Template = Template {
    name: "generate_questions",
    text: include_str!("../templates/generate_questions.txt"),
};
pub const SEMANTIC_DUPLICATES: Template = Template {
    name: "semantic_duplicates",
    text: include_str!("../templates/semantic_duplicates.txt"),
};
pub const CONSISTENCY_CHECK: Template = Template {
    name: "consistency_check",
    text: include_str!("../templates/consistency_check.txt"),
};
pub const ANSWER_SCENE_GRAPH: Template = Template {
    name: "answer_scene_graph",
    text: include_str!("../templates/answer_scene_graph.txt"),
};
pub const JUDGE_ANSWER: Template = Template {
    name: "judge_answer",
    text: include_str!("../templates/judge_answer.txt"),
};

const GUIDANCE: [Template; 8] = [
    Template {
        name: "categories/binary_general",
        text: include_str!("../templates/categories/binary_general.txt"),
    },
    Template {
        name: "categories/binary_existence",
        text: include_str!("../templates/categories/binary_existence.txt"),
    },
    Template {
        name: "categories/binary_logical",
        text: include_str!("../templates/categories/binary_logical.txt"),
    },
    Template {
        name: "categories/measurement",
        text: include_str!("../templates/categories/measurement.txt"),
    },
    Template {
        name: "categories/object_attributes",
        text: include_str!("../templates/categories/object_attributes.txt"),
    },
    Template {
        name: "categories/relations_functional",
        text: include_str!("../templates/categories/relations_functional.txt"),
    },
    Template {
        name: "categories/relations_spatial",
        text: include_str!("../templates/categories/relations_spatial.txt"),
    },
    Template {
        name: "categories/comparison",
        text: include_str!("../templates/categories/comparison.txt"),
    },
];

pub fn guidance(c: QACategory) -> Template {
    GUIDANCE[c.index()]
}

impl Template {
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }

    /// Substitutes every `{{key}}`. Values are inserted literally, so braces
    /// inside them are never expanded again.
    ///
    /// Panics on a placeholder without a value: templates are compiled in, so
    /// this is a programming error rather than an input problem.
    pub fn render(&self, vars: &[(&str, &str)]) -> String {
        let mut out = String::with_capacity(self.text.len() + 256);
        let mut rest = self.text;
        while let Some(open) = rest.find("{{") {
            out.push_str(&rest[..open]);
            let after = &rest[open + 2..];
            let close = after
                .find("}}")
                .unwrap_or_else(|| panic!("template {} has an unterminated placeholder", self.name));
            let key = &after[..close];
            let value = vars
                .iter()
                .find(|(k, _)| *k == key)
                .unwrap_or_else(|| panic!("template {} needs a value for {key}", self.name))
                .1;
            out.push_str(value);
            rest = &after[close + 2..];
        }
        out.push_str(rest);
        out
    }
}

/// Templates used by the question-generation stages.
pub fn generation_templates() -> Vec<Template> {
    let mut t = vec![DESCRIBE_FRAME, GENERATE_QUESTIONS, SEMANTIC_DUPLICATES, CONSISTENCY_CHECK];
    t.extend(GUIDANCE);
    t
}

/// Templates used when answering and judging.
pub fn evaluation_templates() -> Vec<Template> {
    vec![ANSWER_SCENE_GRAPH, JUDGE_ANSWER]
}

pub fn hashes(templates: &[Template]) -> BTreeMap<String, String> {
    templates.iter().map(|t| (t.name.to_string(), t.hash())).collect()
}
