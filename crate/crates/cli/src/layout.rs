//! Output directory layout and staged writes.
//!
//! Each command owns one directory under the output root. It writes into
//! `<dir>.partial` and swaps it into place only after the whole stage has
//! succeeded, so a failed run leaves the previous complete outputs untouched
//! and keeps what it did produce under the `.partial` name.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mapeval_core::ConditionKind;

pub const SEG: &str = "seg";
pub const QA_GEN: &str = "qa_gen";
pub const QA: &str = "qa";
pub const ANSWERS: &str = "answers";
pub const VERDICTS: &str = "verdicts";
pub const REPORT: &str = "report";

pub fn sequence_stem(scene: &str, condition: ConditionKind) -> PathBuf {
    Path::new(scene).join(condition.as_str())
}

pub struct StageDir {
    final_dir: PathBuf,
    staging: PathBuf,
}

impl StageDir {
    pub fn begin(root: &Path, name: &str) -> Result<Self> {
        let final_dir = root.join(name);
        let staging = root.join(format!("{name}.partial"));
        if staging.exists() {
            std::fs::remove_dir_all(&staging).with_context(|| format!("cannot clear {}", staging.display()))?;
        }
        std::fs::create_dir_all(&staging).with_context(|| format!("cannot create {}", staging.display()))?;
        Ok(Self { final_dir, staging })
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.staging.join(rel)
    }

    pub fn write(&self, rel: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        }
        std::fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn write_json<T: serde::Serialize>(&self, rel: impl AsRef<Path>, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text)
    }

    /// Replaces the previous outputs with the staged ones.
    pub fn commit(self) -> Result<PathBuf> {
        if self.final_dir.exists() {
            std::fs::remove_dir_all(&self.final_dir)
                .with_context(|| format!("cannot replace {}", self.final_dir.display()))?;
        }
        std::fs::rename(&self.staging, &self.final_dir)
            .with_context(|| format!("cannot move outputs into {}", self.final_dir.display()))?;
        Ok(self.final_dir)
    }

    pub fn staging_dir(&self) -> &Path {
        &self.staging
    }
}

/// Reads a pretty JSON file written by [`StageDir::write_json`].
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))
}

/// Files with `ext` under `dir`, sorted by path.
pub fn files_with_ext(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).with_context(|| format!("cannot list {}", d.display()))? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == ext) {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}
