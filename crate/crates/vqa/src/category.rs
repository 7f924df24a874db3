use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The eight question families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QACategory {
    BinaryGeneral,
    BinaryExistence,
    BinaryLogical,
    Measurement,
    ObjectAttributes,
    RelationsFunctional,
    RelationsSpatial,
    Comparison,
}

impl QACategory {
    pub const ALL: [QACategory; 8] = [
        QACategory::BinaryGeneral,
        QACategory::BinaryExistence,
        QACategory::BinaryLogical,
        QACategory::Measurement,
        QACategory::ObjectAttributes,
        QACategory::RelationsFunctional,
        QACategory::RelationsSpatial,
        QACategory::Comparison,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QACategory::BinaryGeneral => "binary_general",
            QACategory::BinaryExistence => "binary_existence",
            QACategory::BinaryLogical => "binary_logical",
            QACategory::Measurement => "measurement",
            QACategory::ObjectAttributes => "object_attributes",
            QACategory::RelationsFunctional => "relations_functional",
            QACategory::RelationsSpatial => "relations_spatial",
            QACategory::Comparison => "comparison",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            QACategory::BinaryGeneral => "Binary General",
            QACategory::BinaryExistence => "Binary Existence",
            QACategory::BinaryLogical => "Binary Logical",
            QACategory::Measurement => "Measurement",
            QACategory::ObjectAttributes => "Object Attributes",
            QACategory::RelationsFunctional => "Relations Functional",
            QACategory::RelationsSpatial => "Relations Spatial",
            QACategory::Comparison => "Comparison",
        }
    }

    /// Short code used inside question ids.
    pub fn code(self) -> &'static str {
        match self {
            QACategory::BinaryGeneral => "BG",
            QACategory::BinaryExistence => "BE",
            QACategory::BinaryLogical => "BL",
            QACategory::Measurement => "ME",
            QACategory::ObjectAttributes => "OA",
            QACategory::RelationsFunctional => "RF",
            QACategory::RelationsSpatial => "RS",
            QACategory::Comparison => "CO",
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(
            self,
            QACategory::BinaryGeneral | QACategory::BinaryExistence | QACategory::BinaryLogical
        )
    }

    /// Categories whose answers are compared directly rather than by an LLM judge.
    pub fn is_exact(self) -> bool {
        self.is_binary() || self == QACategory::Measurement
    }
}

impl fmt::Display for QACategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QACategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        QACategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown question category {s:?}"))
    }
}

/// Target share of each category in a generated set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryQuota {
    ratios: [f64; 8],
}

/// Observed category distribution of the reference question sets, in
/// [`QACategory::ALL`] order.
pub const DEFAULT_RATIOS: [f64; 8] = [0.186, 0.166, 0.184, 0.052, 0.170, 0.008, 0.187, 0.047];

impl Default for CategoryQuota {
    fn default() -> Self {
        Self { ratios: DEFAULT_RATIOS }
    }
}

impl CategoryQuota {
    pub fn new(ratios: [f64; 8]) -> Result<Self> {
        if let Some(r) = ratios.iter().find(|r| !r.is_finite() || **r < 0.0) {
            return Err(Error::Param(format!("quota ratio {r} must be a non-negative number")));
        }
        let sum: f64 = ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Param(format!("quota ratios sum to {sum}, expected 1")));
        }
        Ok(Self { ratios })
    }

    /// Builds a quota from `(category, ratio)` pairs; omitted categories get 0.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (QACategory, f64)>) -> Result<Self> {
        let mut ratios = [0.0; 8];
        for (c, r) in pairs {
            ratios[c.index()] = r;
        }
        Self::new(ratios)
    }

    pub fn ratio(&self, c: QACategory) -> f64 {
        self.ratios[c.index()]
    }

    pub fn ratios(&self) -> &[f64; 8] {
        &self.ratios
    }

    /// Splits `n_total` questions over categories with largest-remainder
    /// rounding. Leftover units go to the largest fractional parts; equal
    /// remainders favour the earlier category.
    pub fn targets(&self, n_total: usize) -> [usize; 8] {
        let exact: Vec<f64> = self.ratios.iter().map(|r| r * n_total as f64).collect();
        let mut counts = [0usize; 8];
        for (c, e) in counts.iter_mut().zip(&exact) {
            *c = e.floor() as usize;
        }
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..8).collect();
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &i in order.iter().take(n_total.saturating_sub(assigned)) {
            counts[i] += 1;
        }
        counts
    }
}
