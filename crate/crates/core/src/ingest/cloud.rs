/// 3D points (meters) with one class label per point.
///
/// Class id `-1` marks void/unlabeled points; those never enter the metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPointCloud {
    pub points: Vec<[f64; 3]>,
    pub class_ids: Vec<i32>,
    pub instance_ids: Option<Vec<i32>>,
}

impl LabeledPointCloud {
    pub const VOID: i32 = -1;

    pub fn new(points: Vec<[f64; 3]>, class_ids: Vec<i32>) -> Self {
        assert_eq!(points.len(), class_ids.len(), "one class id per point");
        Self {
            points,
            class_ids,
            instance_ids: None,
        }
    }

    pub fn with_instances(mut self, instance_ids: Vec<i32>) -> Self {
        assert_eq!(self.points.len(), instance_ids.len(), "one instance id per point");
        self.instance_ids = Some(instance_ids);
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn non_finite_count(&self) -> usize {
        self.points
            .iter()
            .filter(|p| p.iter().any(|v| !v.is_finite()))
            .count()
    }

    /// Replace every label outside `[0, class_count)` with void.
    pub fn clamp_to_vocabulary(&mut self, class_count: usize) {
        for id in &mut self.class_ids {
            if *id < 0 || *id as usize >= class_count {
                *id = Self::VOID;
            }
        }
    }

    /// Number of GT points per class, void excluded.
    pub fn class_histogram(&self, class_count: usize) -> Vec<u64> {
        let mut hist = vec![0u64; class_count];
        for &id in &self.class_ids {
            if id >= 0 && (id as usize) < class_count {
                hist[id as usize] += 1;
            }
        }
        hist
    }
}
