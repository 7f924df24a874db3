use crate::error::{Error, Result};
use crate::ingest::LabeledPointCloud;
use crate::seg::KdTree;

/// Default GT-to-prediction association radius in meters.
pub const DEFAULT_RADIUS: f64 = 0.05;

/// For each GT point, the class of the nearest labeled predicted point within
/// `radius` (inclusive), or `None`. Void predictions are not indexed.
pub fn associate_points(
    gt: &LabeledPointCloud,
    pred: &LabeledPointCloud,
    radius: f64,
) -> Result<Vec<Option<i32>>> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Contract(format!("association radius must be > 0, got {radius}")));
    }
    let labeled = |i: usize| pred.class_ids[i] >= 0;
    let tree = KdTree::build(&pred.points, Some(&labeled));
    Ok(gt
        .points
        .iter()
        .map(|&p| tree.nearest_within(p, radius).map(|j| pred.class_ids[j]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_prediction() {
        let gt = LabeledPointCloud::new(
            vec![[0.0, 0.0, 0.0], [0.2, 0.0, 0.0], [0.0, 0.3, 0.1]],
            vec![0, 1, 2],
        );
        let m = associate_points(&gt, &gt, DEFAULT_RADIUS).unwrap();
        assert_eq!(m, vec![Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn outside_radius_is_none() {
        let gt = LabeledPointCloud::new(vec![[0.0; 3]], vec![0]);
        let pred = LabeledPointCloud::new(vec![[0.0, 0.0, 0.1]], vec![0]);
        assert_eq!(associate_points(&gt, &pred, 0.05).unwrap(), vec![None]);
    }

    #[test]
    fn empty_prediction_matches_nothing() {
        let gt = LabeledPointCloud::new(vec![[0.0; 3], [1.0; 3]], vec![0, 1]);
        let pred = LabeledPointCloud::new(vec![], vec![]);
        assert_eq!(associate_points(&gt, &pred, 0.05).unwrap(), vec![None, None]);
    }

    #[test]
    fn void_prediction_not_used() {
        let gt = LabeledPointCloud::new(vec![[0.0; 3]], vec![0]);
        let pred = LabeledPointCloud::new(vec![[0.0; 3], [0.03, 0.0, 0.0]], vec![-1, 4]);
        assert_eq!(associate_points(&gt, &pred, 0.05).unwrap(), vec![Some(4)]);
    }

    #[test]
    fn bad_radius() {
        let c = LabeledPointCloud::new(vec![[0.0; 3]], vec![0]);
        assert!(associate_points(&c, &c, 0.0).is_err());
        assert!(associate_points(&c, &c, f64::NAN).is_err());
    }
}
