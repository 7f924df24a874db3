//! Open-vocabulary label normalization and matching against a GT vocabulary.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Lowercase, turn `_` and `-` into spaces, collapse whitespace, trim.
///
/// Exporters disagree on separators (`wall_cabinet` vs `wall cabinet`), and
/// open-vocabulary models score the two spellings differently.
pub fn normalize_label(raw: &str) -> String {
    raw.to_lowercase()
        .replace(['_', '-'], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// GT class list. Class index is the position in `names`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassVocabulary {
    names: Vec<String>,
    normalized: Vec<String>,
    index: HashMap<String, usize>,
}

impl ClassVocabulary {
    pub fn from_names<S: Into<String>>(names: impl IntoIterator<Item = S>) -> std::result::Result<Self, String> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err("vocabulary is empty".into());
        }
        let mut index = HashMap::with_capacity(names.len());
        let mut normalized = Vec::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            let norm = normalize_label(name);
            if norm.is_empty() {
                return Err(format!("class {i} has an empty name"));
            }
            if let Some(prev) = index.insert(norm.clone(), i) {
                return Err(format!("classes {prev} and {i} both normalize to `{norm}`"));
            }
            normalized.push(norm);
        }
        Ok(Self {
            names,
            normalized,
            index,
        })
    }

    /// One class name per line; line number (from 0) is the class index.
    /// A single trailing newline is allowed.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let body = text.strip_suffix('\n').unwrap_or(text);
        let names = body.split('\n').map(|l| l.trim_end_matches('\r').trim());
        Self::from_names(names).map_err(|m| Error::schema(origin, m))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn normalized(&self) -> &[String] {
        &self.normalized
    }

    pub fn lookup(&self, normalized: &str) -> Option<usize> {
        self.index.get(normalized).copied()
    }
}

/// Text to embedding-vector service.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
}

/// Deterministic mock: each distinct text maps to a pseudo-random unit
/// vector seeded by its SHA-256 digest.
#[derive(Debug, Clone)]
pub struct HashEmbedding {
    pub dim: usize,
}

impl Default for HashEmbedding {
    fn default() -> Self {
        Self { dim: 64 }
    }
}

impl EmbeddingProvider for HashEmbedding {
    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let digest = Sha256::digest(text.as_bytes());
        let mut state = u64::from_le_bytes(digest[..8].try_into().unwrap());
        // splitmix64
        let mut next = || {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^ (z >> 31)
        };
        let mut v: Vec<f64> = (0..self.dim)
            .map(|_| (next() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0)
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}

/// Precomputed vectors keyed by normalized label, e.g. exported from a CLIP
/// text encoder. Unknown labels are a provider error.
#[derive(Debug, Clone, Default)]
pub struct TableEmbedding {
    table: HashMap<String, Vec<f64>>,
}

impl TableEmbedding {
    pub fn new(entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Self {
        Self {
            table: entries.into_iter().map(|(k, v)| (normalize_label(&k), v)).collect(),
        }
    }

    /// JSON object mapping label to vector.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: HashMap<String, Vec<f64>> =
            serde_json::from_str(&text).map_err(|e| Error::schema(path, e.to_string()))?;
        Ok(Self::new(map))
    }
}

impl EmbeddingProvider for TableEmbedding {
    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        self.table
            .get(&normalize_label(text))
            .cloned()
            .ok_or_else(|| Error::Embedding(format!("no embedding for `{text}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    Exact,
    Embedding,
}

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.7;

/// Maps predicted label strings onto GT class indices.
#[derive(Clone)]
pub struct LabelMatcher {
    mode: MatchMode,
    provider: Option<Arc<dyn EmbeddingProvider>>,
    similarity_threshold: f64,
}

impl std::fmt::Debug for LabelMatcher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LabelMatcher")
            .field("mode", &self.mode)
            .field("similarity_threshold", &self.similarity_threshold)
            .finish()
    }
}

impl LabelMatcher {
    pub fn exact() -> Self {
        Self {
            mode: MatchMode::Exact,
            provider: None,
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
        }
    }

    pub fn embedding(provider: Arc<dyn EmbeddingProvider>, similarity_threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&similarity_threshold) {
            return Err(Error::Contract(format!(
                "similarity threshold {similarity_threshold} outside [0, 1]"
            )));
        }
        Ok(Self {
            mode: MatchMode::Embedding,
            provider: Some(provider),
            similarity_threshold,
        })
    }

    pub fn mode(&self) -> MatchMode {
        self.mode
    }

    pub fn similarity_threshold(&self) -> Option<f64> {
        (self.mode == MatchMode::Embedding).then_some(self.similarity_threshold)
    }

    pub fn match_label(&self, pred: &str, vocab: &ClassVocabulary) -> Result<Option<usize>> {
        Ok(self.match_all(&[pred], vocab)?.pop().flatten())
    }

    /// Match several labels, embedding the vocabulary once.
    pub fn match_all<S: AsRef<str>>(&self, preds: &[S], vocab: &ClassVocabulary) -> Result<Vec<Option<usize>>> {
        if vocab.is_empty() {
            return Err(Error::Contract("empty vocabulary".into()));
        }
        match (self.mode, &self.provider) {
            (MatchMode::Exact, _) => Ok(preds
                .iter()
                .map(|p| vocab.lookup(&normalize_label(p.as_ref())))
                .collect()),
            (MatchMode::Embedding, Some(provider)) => {
                let class_vecs = vocab
                    .normalized()
                    .iter()
                    .map(|name| provider.embed(name))
                    .collect::<Result<Vec<_>>>()?;
                preds
                    .iter()
                    .map(|p| {
                        let v = provider.embed(&normalize_label(p.as_ref()))?;
                        Ok(best_match(&v, &class_vecs, self.similarity_threshold))
                    })
                    .collect()
            }
            (MatchMode::Embedding, None) => Err(Error::Contract("embedding matcher without provider".into())),
        }
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    // Rounding can leave cos(v, v) a hair under 1.
    if a == b && a.iter().any(|x| *x != 0.0) {
        return 1.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

// Strict `>` keeps the lowest index on ties.
fn best_match(query: &[f64], classes: &[Vec<f64>], threshold: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in classes.iter().enumerate() {
        let s = cosine(query, c);
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((i, s));
        }
    }
    best.filter(|&(_, s)| s >= threshold).map(|(i, _)| i)
}
