//! Point association and 3D semantic segmentation metrics.
//!
//! GT points are the reference: each GT point looks up the nearest predicted
//! point within a radius and takes its class. Unmatched GT points count as
//! false negatives of their class. Per-class accuracy is TP / (TP + FN),
//! i.e. recall, averaged over classes that have GT points.

mod aggregate;
mod associate;
mod confusion;
mod kdtree;
mod metrics;

pub use aggregate::{aggregate_conditions, ConditionAggregate, Metric, MinMaxAvg};
pub use associate::{associate_points, DEFAULT_RADIUS};
pub use confusion::{build_confusion, ConfusionMatrix};
pub use kdtree::KdTree;
pub use metrics::{compute_degradation, compute_fmiou, compute_iou_per_class, compute_macc};

use serde::{Deserialize, Serialize};

use crate::condition::ConditionKind;
use crate::error::{Error, Result};
use crate::ingest::LabeledPointCloud;

/// Parameters needed to reproduce a segmentation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationParams {
    pub radius: f64,
    pub matcher: crate::labels::MatchMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity_threshold: Option<f64>,
}

/// Metrics for one (method, scene, condition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationResult {
    pub method: String,
    pub scene_id: String,
    pub condition: ConditionKind,
    pub macc: f64,
    pub fmiou: f64,
    /// `None` for classes with neither GT points nor predictions.
    pub per_class_iou: Vec<Option<f64>>,
    /// n_c: GT point count per class.
    pub class_point_counts: Vec<u64>,
    pub params: AssociationParams,
}

impl SegmentationResult {
    pub fn metric(&self, metric: Metric) -> f64 {
        match metric {
            Metric::MAcc => self.macc,
            Metric::FMIoU => self.fmiou,
        }
    }
}

/// Associate, tally and score one prediction against its GT cloud.
///
/// `pred_to_gt` optionally remaps predicted label ids onto GT classes
/// (the output of label matching); unmapped predictions become void.
pub fn evaluate_clouds(
    gt: &LabeledPointCloud,
    pred: &LabeledPointCloud,
    class_count: usize,
    pred_to_gt: Option<&[Option<usize>]>,
    radius: f64,
) -> Result<ConfusionMatrix> {
    let pred = match pred_to_gt {
        None => pred.clone(),
        Some(map) => {
            let mut remapped = pred.clone();
            for id in &mut remapped.class_ids {
                *id = usize::try_from(*id)
                    .ok()
                    .and_then(|i| map.get(i).copied().flatten())
                    .map_or(LabeledPointCloud::VOID, |c| c as i32);
            }
            remapped
        }
    };
    if pred.class_ids.iter().any(|&c| c >= class_count as i32) {
        return Err(Error::Contract(format!(
            "predicted class id outside vocabulary of {class_count} classes"
        )));
    }
    let matched = associate_points(gt, &pred, radius)?;
    let (gt_classes, matched): (Vec<i32>, Vec<Option<i32>>) = gt
        .class_ids
        .iter()
        .zip(matched)
        .filter(|(&c, _)| c >= 0 && (c as usize) < class_count)
        .map(|(&c, m)| (c, m))
        .unzip();
    build_confusion(&gt_classes, &matched, class_count)
}
