use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::condition::ConditionKind;
use crate::error::{Error, Result};
use crate::seg::SegmentationResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "macc")]
    MAcc,
    #[serde(rename = "fmiou")]
    FMIoU,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::MAcc, Metric::FMIoU];

    pub fn title(self) -> &'static str {
        match self {
            Metric::MAcc => "mAcc",
            Metric::FMIoU => "f-mIoU",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Metric::MAcc => "macc",
            Metric::FMIoU => "fmiou",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxAvg {
    pub min: f64,
    pub max: f64,
    pub avg: f64,
}

impl MinMaxAvg {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Contract("min/max/avg of an empty set".into()));
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let avg = values.iter().sum::<f64>() / values.len() as f64;
        Ok(Self { min, max, avg })
    }
}

/// One method's metric across conditions: the per-condition value (mean over
/// that condition's scenes) and min/max/avg over those condition values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionAggregate {
    pub method: String,
    pub metric: Metric,
    pub per_condition: BTreeMap<ConditionKind, f64>,
    pub summary: MinMaxAvg,
}

/// Group by method and metric, average scenes within a condition, then
/// summarize across conditions. Output is sorted by method, then metric.
pub fn aggregate_conditions(results: &[SegmentationResult]) -> Result<Vec<ConditionAggregate>> {
    if results.is_empty() {
        return Err(Error::Contract("no segmentation results to aggregate".into()));
    }
    let mut grouped: BTreeMap<&str, BTreeMap<ConditionKind, Vec<&SegmentationResult>>> = BTreeMap::new();
    for r in results {
        grouped
            .entry(r.method.as_str())
            .or_default()
            .entry(r.condition)
            .or_default()
            .push(r);
    }
    let mut out = Vec::new();
    for (method, by_condition) in grouped {
        for metric in Metric::ALL {
            let per_condition: BTreeMap<ConditionKind, f64> = by_condition
                .iter()
                .map(|(&cond, rs)| {
                    let mean = rs.iter().map(|r| r.metric(metric)).sum::<f64>() / rs.len() as f64;
                    (cond, mean)
                })
                .collect();
            let values: Vec<f64> = per_condition.values().copied().collect();
            out.push(ConditionAggregate {
                method: method.to_string(),
                metric,
                summary: MinMaxAvg::from_values(&values)?,
                per_condition,
            });
        }
    }
    Ok(out)
}
