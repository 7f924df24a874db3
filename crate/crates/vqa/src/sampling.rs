use std::path::{Path, PathBuf};

use mapeval_core::ingest::list_keyframes;
use mapeval_core::ConditionKind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSample {
    /// Position of the frame in the sorted keyframe directory.
    pub frame_id: u32,
    pub image_path: PathBuf,
    pub scene_id: String,
    pub condition: ConditionKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingPolicy {
    /// Every `n`-th frame starting at 0, plus the last frame.
    Stride(usize),
    /// `n` frames spread evenly from first to last.
    Count(usize),
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        SamplingPolicy::Stride(10)
    }
}

impl SamplingPolicy {
    /// Indices chosen out of `n` frames, strictly increasing.
    pub fn select(self, n: usize) -> Result<Vec<usize>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut picked: Vec<usize> = match self {
            SamplingPolicy::Stride(0) | SamplingPolicy::Count(0) => {
                return Err(Error::Param(format!("sampling policy {self:?} selects nothing")))
            }
            SamplingPolicy::Stride(s) => (0..n).step_by(s).collect(),
            SamplingPolicy::Count(k) if k >= n => (0..n).collect(),
            SamplingPolicy::Count(1) => vec![0],
            SamplingPolicy::Count(k) => (0..k).map(|i| (i * (n - 1) + (k - 1) / 2) / (k - 1)).collect(),
        };
        if picked.last() != Some(&(n - 1)) {
            picked.push(n - 1);
        }
        picked.dedup();
        Ok(picked)
    }
}

/// Picks keyframes from `dir` for one sequence.
pub fn sample_keyframes(
    dir: &Path,
    scene_id: &str,
    condition: ConditionKind,
    policy: SamplingPolicy,
) -> Result<Vec<FrameSample>> {
    let frames = list_keyframes(dir)?;
    if frames.is_empty() {
        return Err(Error::Ingest(mapeval_core::Error::Format {
            path: dir.to_path_buf(),
            message: "keyframe directory contains no images".into(),
        }));
    }
    Ok(policy
        .select(frames.len())?
        .into_iter()
        .map(|i| FrameSample {
            frame_id: i as u32,
            image_path: frames[i].clone(),
            scene_id: scene_id.to_string(),
            condition,
        })
        .collect())
}
