//! Shared helpers for the CLI tests: fixture paths, config files, and a
//! rule-based stand-in for the vision-language model.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::Parser;
use mapeval::{Cli, Env};
use mapeval_vqa::text::normalize_answer;
use mapeval_gateway::{ChatResponse, PreparedRequest, Transport, TransportError};
use serde_json::{json, Value};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/apt")
}

pub fn replay_dir() -> PathBuf {
    fixture_dir().join("replay")
}

/// The fixture run config with every path made absolute and outputs sent
/// to `out`. `replay` selects whether the bundled replay store is used.
pub fn fixture_config_text(out: &Path, replay: bool) -> String {
    let fx = fixture_dir();
    let text = std::fs::read_to_string(fx.join("mapeval.toml")).unwrap();
    let mut text = text
        .replace("manifest = \"manifest.toml\"", &format!("manifest = {:?}", fx.join("manifest.toml")))
        .replace("output_dir = \"out\"", &format!("output_dir = {out:?}"))
        .replace("\"methods/", &format!("\"{}/methods/", fx.display()))
        .replace("replay_dir = \"replay\"", &format!("replay_dir = {:?}", fx.join("replay")));
    if !replay {
        text = text.replace(&format!("replay_dir = {:?}\n", fx.join("replay")), "");
    }
    text
}

/// Writes `text` as `mapeval.toml` under `dir`.
pub fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("mapeval.toml");
    std::fs::write(&path, text).unwrap();
    path
}

/// Runs the CLI in-process.
pub fn run_cli(config: &Path, args: &[&str], env: Env) -> anyhow::Result<i32> {
    let mut argv = vec!["mapeval".to_string(), "--config".into(), config.display().to_string()];
    argv.extend(args.iter().map(|a| a.to_string()));
    mapeval::run(Cli::try_parse_from(argv)?, env)
}

/// All files under `dir` with their bytes, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

const ABSENT: [&str; 8] = ["piano", "bathtub", "fireplace", "television", "refrigerator", "bicycle", "aquarium", "guitar"];
const RELATIONS: [&str; 4] = ["in front of", "next to", "behind", "under"];
const COLORS: [&str; 8] = ["gray", "blue", "brown", "yellow", "white", "black", "green", "red"];
const MATERIALS: [(&str, &str); 5] = [("fabric", "fabric"), ("wooden", "wood"), ("metal", "metal"), ("leather", "leather"), ("wool", "wool")];
const SIZES: [&str; 3] = ["small", "medium", "large"];
const FUNCTIONS: [(&str, &str); 7] = [
    ("sitting", "sofa"),
    ("holding drinks", "coffee table"),
    ("lighting the room", "lamp"),
    ("entering the room", "door"),
    ("storing books", "bookshelf"),
    ("decoration", "plant"),
    ("covering the floor", "rug"),
];

/// Deterministic stand-in for the model. Frame descriptions come from the
/// `.json` sidecar next to each keyframe image; every other task is answered
/// by simple rules over the prompt text.
pub struct Responder {
    sidecars: HashMap<Vec<u8>, String>,
    calls: AtomicUsize,
}

impl Responder {
    pub fn new() -> Self {
        let mut sidecars = HashMap::new();
        let root = fixture_dir().join("keyframes");
        let mut stack = vec![root];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else if p.extension().is_some_and(|e| e == "ppm") {
                    let desc = std::fs::read_to_string(p.with_extension("json")).unwrap();
                    sidecars.insert(std::fs::read(&p).unwrap(), desc);
                }
            }
        }
        Self {
            sidecars,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn reply(&self, req: &PreparedRequest) -> String {
        let prompt = &req.request.messages[0].text;
        let task = prompt.lines().next().unwrap_or("").trim_start_matches("Task: ");
        match task {
            "describe_frame" => {
                let image = &req.images[0][0].bytes;
                self.sidecars.get(image).cloned().expect("unknown keyframe")
            }
            "generate_questions" => generate(prompt),
            "semantic_duplicates" => json!({"duplicate_pairs": []}).to_string(),
            "consistency_check" => {
                let question = field(prompt, "Question: ");
                if question.contains("plant") {
                    json!({"valid": false, "reason": "ambiguous"}).to_string()
                } else {
                    json!({"valid": true, "reason": ""}).to_string()
                }
            }
            "answer_question" => answer(prompt),
            "judge_answer" => {
                let gt = normalize_answer(&field(prompt, "Ground-truth answer: "));
                let pred = normalize_answer(&field(prompt, "Predicted answer: "));
                let correct = !gt.is_empty() && format!(" {pred} ").contains(&format!(" {gt} "));
                let rationale = if correct { "The prediction names the reference answer." } else { "The prediction differs." };
                json!({"correct": correct, "rationale": rationale}).to_string()
            }
            other => panic!("unexpected task {other}"),
        }
    }
}

impl Default for Responder {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for Responder {
    fn send(&self, req: &PreparedRequest) -> Result<ChatResponse, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(ChatResponse::text(self.reply(req)))
    }
}

fn field(prompt: &str, prefix: &str) -> String {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix(prefix))
        .unwrap_or_default()
        .trim()
        .to_string()
}

struct Obj {
    name: String,
    attrs: BTreeMap<String, String>,
    relations: Vec<(String, String)>,
}

/// Parses the object lines of a unified description, dropping conflicting
/// attribute values.
fn parse_objects(prompt: &str) -> Vec<Obj> {
    let desc = prompt.split("Scene description:\n").nth(1).unwrap_or("");
    let mut objs = Vec::new();
    for line in desc.lines().skip_while(|l| *l != "Objects:").skip(1) {
        let Some(line) = line.strip_prefix("- ") else { break };
        let mut parts = line.split("; ");
        let head = parts.next().unwrap().split(" [conflicting").next().unwrap();
        let mut head_parts = head.split(", ");
        let name = head_parts.next().unwrap().to_string();
        let attrs = head_parts
            .filter_map(|kv| kv.split_once(": "))
            .filter(|(_, v)| !v.contains('|'))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let relations = parts
            .filter_map(|p| p.split_once(": "))
            .filter(|(k, _)| *k != "frames")
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        objs.push(Obj { name, attrs, relations });
    }
    objs
}

fn size_rank(s: &str) -> Option<usize> {
    SIZES.iter().position(|x| *x == s)
}

fn generate(prompt: &str) -> String {
    let category = field(prompt, "Category: ");
    let count: usize = field(prompt, "Number of questions: ").parse().unwrap();
    let objs = parse_objects(prompt);
    let q = |question: String, answer: Value, objects: Vec<&str>| json!({"question": question, "answer": answer, "objects": objects});
    let mut cands: Vec<Value> = Vec::new();
    match category.as_str() {
        "binary_general" => {
            for o in &objs {
                cands.push(q(format!("Is there a {} in the room?", o.name), json!("yes"), vec![&o.name]));
            }
            for o in &objs {
                if let Some(c) = o.attrs.get("color") {
                    cands.push(q(format!("Is the {} {c}?", o.name), json!(true), vec![&o.name]));
                }
                for (rel, other) in &o.relations {
                    cands.push(q(format!("Is the {} {rel} the {other}?", o.name), json!("yes"), vec![&o.name, other]));
                }
            }
        }
        "binary_existence" => {
            for a in ABSENT {
                cands.push(q(format!("Is there a {a} in the room?"), json!("no"), vec![a]));
            }
        }
        "binary_logical" => {
            for (i, o) in objs.iter().enumerate() {
                let other = &objs[(i + 1) % objs.len()].name;
                cands.push(q(format!("Is there both a {} and a {other} in the room?", o.name), json!("yes"), vec![&o.name, other]));
                let absent = ABSENT[i % ABSENT.len()];
                cands.push(q(format!("Is there both a {} and a {absent} in the room?", o.name), json!("no"), vec![&o.name, absent]));
            }
        }
        "measurement" => {
            for o in &objs {
                cands.push(q(format!("How many {}s are in the room?", o.name), json!(1), vec![&o.name]));
            }
        }
        "object_attributes" => {
            for attr in ["color", "material", "size"] {
                for o in &objs {
                    if let Some(v) = o.attrs.get(attr) {
                        cands.push(q(format!("What is the {attr} of the {}?", o.name), json!(v), vec![&o.name]));
                    }
                }
            }
        }
        "relations_functional" => {
            for o in &objs {
                if let Some(f) = o.attrs.get("function") {
                    cands.push(q(format!("Which object in the room is used for {f}?"), json!(o.name), vec![&o.name]));
                }
            }
        }
        "relations_spatial" => {
            for o in &objs {
                for (rel, other) in &o.relations {
                    cands.push(q(format!("What is the {} {rel}?", o.name), json!(other), vec![&o.name, other]));
                }
            }
        }
        "comparison" => {
            for (i, a) in objs.iter().enumerate() {
                for b in &objs[i + 1..] {
                    let (Some(sa), Some(sb)) = (
                        a.attrs.get("size").and_then(|s| size_rank(s)),
                        b.attrs.get("size").and_then(|s| size_rank(s)),
                    ) else {
                        continue;
                    };
                    if sa != sb {
                        let larger = if sa > sb { &a.name } else { &b.name };
                        cands.push(q(
                            format!("Which is larger, the {} or the {}?", a.name, b.name),
                            json!(larger),
                            vec![&a.name, &b.name],
                        ));
                    }
                }
            }
        }
        other => panic!("unknown category {other}"),
    }
    // Too few distinct candidates: repeat, as a real model tends to.
    let mut questions: Vec<Value> = cands.iter().cycle().take(count).cloned().collect();
    if cands.is_empty() {
        questions.clear();
    }
    json!({"questions": questions}).to_string()
}

struct Node {
    id: String,
    label: String,
    caption: String,
}

fn parse_graph(prompt: &str) -> (Vec<Node>, Vec<(String, String, String)>) {
    let text = prompt.split("Scene graph:\n").nth(1).unwrap_or("");
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut in_relations = false;
    for line in text.lines() {
        if line.starts_with("Relations (") {
            in_relations = true;
            continue;
        }
        let Some(rest) = line.strip_prefix("- [") else { continue };
        let (id, rest) = rest.split_once("] ").unwrap();
        if in_relations {
            let (rel, target) = rest.rsplit_once(" [").unwrap();
            edges.push((id.to_string(), rel.to_string(), target.trim_end_matches(']').to_string()));
        } else {
            let (label, caption) = match rest.split_once(" (caption: ") {
                Some((l, c)) => (l, c.split(';').next().unwrap().trim_end_matches(')')),
                None => (rest, ""),
            };
            nodes.push(Node {
                id: id.to_string(),
                label: label.to_string(),
                caption: caption.to_string(),
            });
        }
    }
    (nodes, edges)
}

fn answer(prompt: &str) -> String {
    let question = field(prompt, "Question: ");
    let (nodes, edges) = parse_graph(prompt);
    let node = |label: &str| nodes.iter().find(|n| n.label == label);
    let label_of = |id: &str| nodes.iter().find(|n| n.id == id).map(|n| n.label.clone());
    let yes_no = |b: bool| if b { "Yes." } else { "No." }.to_string();
    let q = question.trim_end_matches('?');

    if let Some((x, y)) = q
        .strip_prefix("Is there both a ")
        .and_then(|r| r.strip_suffix(" in the room"))
        .and_then(|r| r.split_once(" and a "))
    {
        return yes_no(node(x).is_some() && node(y).is_some());
    }
    if let Some(x) = q.strip_prefix("Is there a ").and_then(|r| r.strip_suffix(" in the room")) {
        return yes_no(node(x).is_some());
    }
    if let Some(x) = q.strip_prefix("How many ").and_then(|r| r.strip_suffix("s are in the room")) {
        return nodes.iter().filter(|n| n.label == x).count().to_string();
    }
    if let Some(rest) = q.strip_prefix("What is the ") {
        if let Some((attr, x)) = rest.split_once(" of the ") {
            let Some(n) = node(x) else { return "I don't know".into() };
            let words: Vec<&str> = n.caption.split_whitespace().collect();
            let found = match attr {
                "color" => COLORS.iter().find(|c| words.contains(c)).map(|c| c.to_string()),
                "material" => MATERIALS.iter().find(|(w, _)| words.contains(w)).map(|(_, m)| m.to_string()),
                "size" => SIZES.iter().find(|s| words.contains(s)).map(|s| s.to_string()),
                _ => None,
            };
            return found.unwrap_or_else(|| "I don't know".into());
        }
        for rel in RELATIONS {
            if let Some(x) = rest.strip_suffix(&format!(" {rel}")) {
                let target = node(x).and_then(|n| {
                    edges.iter().find(|(s, r, _)| *s == n.id && r == rel).and_then(|(_, _, t)| label_of(t))
                });
                return target.map_or("Nothing.".into(), |t| format!("The {t}."));
            }
        }
    }
    if let Some(rest) = q.strip_prefix("Is the ") {
        for rel in RELATIONS {
            if let Some((x, y)) = rest.split_once(&format!(" {rel} the ")) {
                let hit = match (node(x), node(y)) {
                    (Some(a), Some(b)) => edges.iter().any(|(s, r, t)| *s == a.id && r == rel && *t == b.id),
                    _ => false,
                };
                return yes_no(hit);
            }
        }
        if let Some((x, color)) = rest.rsplit_once(' ') {
            return yes_no(node(x).is_some_and(|n| n.caption.split_whitespace().any(|w| w == color)));
        }
    }
    if let Some(f) = q.strip_prefix("Which object in the room is used for ") {
        let obj = FUNCTIONS.iter().find(|(k, _)| *k == f).map(|(_, o)| *o);
        return match obj.and_then(node) {
            Some(n) => format!("The {}.", n.label),
            None => "I don't know".into(),
        };
    }
    if let Some((a, b)) = q.strip_prefix("Which is larger, the ").and_then(|r| r.split_once(" or the ")) {
        let size = |x: &str| node(x).and_then(|n| n.caption.split_whitespace().find_map(size_rank));
        return match (size(a), size(b)) {
            (Some(sa), Some(sb)) if sb > sa => format!("The {b}."),
            _ => format!("The {a}."),
        };
    }
    "I don't know".into()
}
