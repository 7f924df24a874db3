use crate::error::{Error, Result};
use crate::seg::ConfusionMatrix;

/// Mean per-class accuracy TP_c / (TP_c + FN_c) over classes with GT points.
pub fn compute_macc(cm: &ConfusionMatrix) -> Result<f64> {
    let per_class: Vec<f64> = (0..cm.class_count())
        .filter_map(|c| {
            let n = cm.gt_points(c);
            (n > 0).then(|| cm.true_positives(c) as f64 / n as f64)
        })
        .collect();
    if per_class.is_empty() {
        return Err(Error::UndefinedMetric("mAcc: no class has GT points".into()));
    }
    Ok(per_class.iter().sum::<f64>() / per_class.len() as f64)
}

/// IoU_c = TP / (TP + FP + FN); `None` when the denominator is zero.
pub fn compute_iou_per_class(cm: &ConfusionMatrix) -> Vec<Option<f64>> {
    (0..cm.class_count())
        .map(|c| {
            let tp = cm.true_positives(c);
            let denom = tp + cm.false_positives(c) + cm.false_negatives(c);
            (denom > 0).then(|| tp as f64 / denom as f64)
        })
        .collect()
}

/// Frequency-weighted mean IoU: Σ n_c·IoU_c / Σ n_c over classes with n_c > 0.
pub fn compute_fmiou(cm: &ConfusionMatrix) -> Result<f64> {
    let iou = compute_iou_per_class(cm);
    let mut weighted = 0.0;
    let mut total = 0u64;
    for (c, iou) in iou.into_iter().enumerate() {
        let n = cm.gt_points(c);
        if n == 0 {
            continue;
        }
        // n_c > 0 makes the IoU denominator positive.
        weighted += n as f64 * iou.expect("IoU defined for classes with GT points");
        total += n;
    }
    if total == 0 {
        return Err(Error::UndefinedMetric("f-mIoU: no class has GT points".into()));
    }
    Ok(weighted / total as f64)
}

/// Relative change of `condition` against `baseline`, in percent.
pub fn compute_degradation(baseline: f64, condition: f64) -> Result<f64> {
    if baseline == 0.0 {
        return Err(Error::UndefinedMetric("degradation against a zero baseline".into()));
    }
    Ok((condition - baseline) / baseline * 100.0)
}
