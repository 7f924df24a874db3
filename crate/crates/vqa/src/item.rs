use serde::{Deserialize, Serialize};

use crate::category::QACategory;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QAStatus {
    Generated,
    Validated,
    Rejected(String),
}

/// One question with its ground truth and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QAItem {
    pub qa_id: String,
    pub category: QACategory,
    pub question: String,
    pub gt_answer: String,
    pub source_frames: Vec<u32>,
    pub referenced_objects: Vec<String>,
    pub status: QAStatus,
}

impl QAItem {
    pub fn is_rejected(&self) -> bool {
        matches!(self.status, QAStatus::Rejected(_))
    }

    pub fn is_validated(&self) -> bool {
        self.status == QAStatus::Validated
    }

    pub fn reject(&mut self, reason: impl Into<String>) {
        self.status = QAStatus::Rejected(reason.into());
    }

    /// Checks the answer-shape invariants that hold for every kept item.
    pub fn check(&self) -> Result<(), String> {
        if self.is_validated() && self.gt_answer.trim().is_empty() {
            return Err(format!("{}: validated item has an empty answer", self.qa_id));
        }
        if self.category.is_binary() && !matches!(self.gt_answer.as_str(), "yes" | "no") {
            return Err(format!("{}: binary answer {:?} is not yes/no", self.qa_id, self.gt_answer));
        }
        if self.category == QACategory::Measurement
            && !crate::text::parse_number(&self.gt_answer).is_some_and(|n| n >= 0.0)
        {
            return Err(format!("{}: measurement answer {:?} is not a non-negative number", self.qa_id, self.gt_answer));
        }
        Ok(())
    }
}

/// `scene-condition-CODE-007`
pub fn qa_id(scene: &str, condition: &str, category: QACategory, index: usize) -> String {
    format!("{scene}-{condition}-{}-{index:03}", category.code())
}
