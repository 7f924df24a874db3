use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// GT-vs-predicted point counts. Row = GT class, column = predicted class.
/// `unmatched[c]` holds GT points of class `c` that found no prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    class_count: usize,
    counts: Vec<u64>,
    unmatched: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(class_count: usize) -> Self {
        Self {
            class_count,
            counts: vec![0; class_count * class_count],
            unmatched: vec![0; class_count],
        }
    }

    /// Build from explicit rows; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<u64>], unmatched: &[u64]) -> Result<Self> {
        let c = rows.len();
        if unmatched.len() != c || rows.iter().any(|r| r.len() != c) {
            return Err(Error::Contract(format!("confusion matrix must be {c}x{c} with {c} unmatched entries")));
        }
        Ok(Self {
            class_count: c,
            counts: rows.concat(),
            unmatched: unmatched.to_vec(),
        })
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn count(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.class_count + pred]
    }

    pub fn unmatched(&self, gt: usize) -> u64 {
        self.unmatched[gt]
    }

    pub fn row(&self, gt: usize) -> &[u64] {
        &self.counts[gt * self.class_count..(gt + 1) * self.class_count]
    }

    pub fn true_positives(&self, c: usize) -> u64 {
        self.count(c, c)
    }

    /// n_c: all GT points of class `c`, matched or not.
    pub fn gt_points(&self, c: usize) -> u64 {
        self.row(c).iter().sum::<u64>() + self.unmatched[c]
    }

    pub fn predicted_points(&self, c: usize) -> u64 {
        (0..self.class_count).map(|g| self.count(g, c)).sum()
    }

    pub fn false_negatives(&self, c: usize) -> u64 {
        self.gt_points(c) - self.true_positives(c)
    }

    pub fn false_positives(&self, c: usize) -> u64 {
        self.predicted_points(c) - self.true_positives(c)
    }

    pub fn add(&mut self, gt: usize, pred: Option<usize>) {
        match pred {
            Some(p) => self.counts[gt * self.class_count + p] += 1,
            None => self.unmatched[gt] += 1,
        }
    }
}

/// Tally GT classes against matched predictions. Void GT points must be
/// filtered out beforehand; any id outside `[0, class_count)` is rejected.
pub fn build_confusion(
    gt_classes: &[i32],
    matched_pred: &[Option<i32>],
    class_count: usize,
) -> Result<ConfusionMatrix> {
    if gt_classes.len() != matched_pred.len() {
        return Err(Error::Contract(format!(
            "{} GT labels but {} matches",
            gt_classes.len(),
            matched_pred.len()
        )));
    }
    let check = |id: i32, what: &str| {
        usize::try_from(id)
            .ok()
            .filter(|&i| i < class_count)
            .ok_or_else(|| Error::Contract(format!("{what} class id {id} outside [0, {class_count})")))
    };
    let mut cm = ConfusionMatrix::zeros(class_count);
    for (&g, &p) in gt_classes.iter().zip(matched_pred) {
        let g = check(g, "GT")?;
        let p = p.map(|p| check(p, "predicted")).transpose()?;
        cm.add(g, p);
    }
    Ok(cm)
}
