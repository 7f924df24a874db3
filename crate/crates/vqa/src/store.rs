//! JSON Lines files: one header object on the first line, then one record
//! per line. Writing is deterministic, so a file read and written again is
//! byte-identical.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use mapeval_core::ConditionKind;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::answer::SystemAnswer;
use crate::category::{CategoryQuota, QACategory};
use crate::error::{Error, Result};
use crate::item::QAItem;
use crate::judge::Verdict;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaSetHeader {
    pub dataset: String,
    pub scene: String,
    pub condition: ConditionKind,
    pub quotas: BTreeMap<QACategory, f64>,
    pub n_total: usize,
    pub seed: u64,
    pub model_id: String,
    pub temperatures: BTreeMap<String, f64>,
    /// Template name to SHA-256 of its text.
    pub templates: BTreeMap<String, String>,
}

impl QaSetHeader {
    pub fn quota(&self) -> Result<CategoryQuota> {
        CategoryQuota::from_pairs(self.quotas.iter().map(|(c, r)| (*c, *r)))
    }
}

pub fn quota_map(q: &CategoryQuota) -> BTreeMap<QACategory, f64> {
    QACategory::ALL.iter().map(|c| (*c, q.ratio(*c))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerSetHeader {
    pub dataset: String,
    pub scene: String,
    pub condition: ConditionKind,
    pub method: String,
    /// Model used for scene-graph answering; empty for direct answers.
    pub model_id: String,
    pub temperature: f64,
    pub templates: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictSetHeader {
    pub dataset: String,
    pub scene: String,
    pub condition: ConditionKind,
    pub method: String,
    pub judge_model_id: String,
    pub judge_temperature: f64,
    pub templates: BTreeMap<String, String>,
}

/// Serializes a header and records to JSON Lines text.
pub fn to_jsonl<H: Serialize, T: Serialize>(header: &H, records: &[T]) -> String {
    let mut out = serde_json::to_string(header).expect("header serializes");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Parses JSON Lines text; `origin` only labels errors.
pub fn from_jsonl<H: DeserializeOwned, T: DeserializeOwned>(text: &str, origin: &Path) -> Result<(H, Vec<T>)> {
    let schema = |line: usize, message: String| Error::Schema {
        path: origin.to_path_buf(),
        line: Some(line),
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| Error::Schema {
        path: origin.to_path_buf(),
        line: None,
        message: "file has no header line".into(),
    })?;
    let header: H = serde_json::from_str(first).map_err(|e| schema(1, format!("header: {e}")))?;
    let records = lines
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| schema(i + 1, e.to_string())))
        .collect::<Result<Vec<T>>>()?;
    Ok((header, records))
}

pub fn read_jsonl<H: DeserializeOwned, T: DeserializeOwned>(path: &Path) -> Result<(H, Vec<T>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    from_jsonl(&text, path)
}

/// Writes `contents` to `path` through a temporary sibling and a rename, so
/// an interrupted write never leaves a truncated file behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |e| Error::Io { path: p, source: e }
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
    }
    let mut tmp = PathBuf::from(path);
    tmp.as_mut_os_string().push(format!(".{}.tmp", std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(io(&tmp))?;
    f.write_all(contents).and_then(|_| f.sync_all()).map_err(io(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io(path))
}

pub fn write_jsonl<H: Serialize, T: Serialize>(path: &Path, header: &H, records: &[T]) -> Result<()> {
    write_atomic(path, to_jsonl(header, records).as_bytes())
}

pub fn store_qa_set(path: &Path, header: &QaSetHeader, items: &[QAItem]) -> Result<()> {
    for item in items.iter().filter(|i| i.is_validated()) {
        item.check().map_err(Error::Contract)?;
    }
    write_jsonl(path, header, items)
}

pub fn load_qa_set(path: &Path) -> Result<(QaSetHeader, Vec<QAItem>)> {
    let (header, items): (QaSetHeader, Vec<QAItem>) = read_jsonl(path)?;
    header.quota().map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        line: Some(1),
        message: e.to_string(),
    })?;
    Ok((header, items))
}

pub fn store_answers(path: &Path, header: &AnswerSetHeader, answers: &[SystemAnswer]) -> Result<()> {
    write_jsonl(path, header, answers)
}

pub fn load_answers(path: &Path) -> Result<(AnswerSetHeader, Vec<SystemAnswer>)> {
    read_jsonl(path)
}

pub fn store_verdicts(path: &Path, header: &VerdictSetHeader, verdicts: &[Verdict]) -> Result<()> {
    write_jsonl(path, header, verdicts)
}

pub fn load_verdicts(path: &Path) -> Result<(VerdictSetHeader, Vec<Verdict>)> {
    read_jsonl(path)
}
