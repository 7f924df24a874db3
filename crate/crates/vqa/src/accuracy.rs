use std::collections::{BTreeMap, HashMap};

use mapeval_core::ConditionKind;
use serde::{Deserialize, Serialize};

use crate::category::QACategory;
use crate::error::{Error, Result};
use crate::item::QAItem;
use crate::judge::Verdict;

/// What to do with verdicts whose judge never answered usably.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeFailurePolicy {
    #[default]
    CountIncorrect,
    Exclude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccuracyOptions {
    pub include_functional: bool,
    pub failure_policy: JudgeFailurePolicy,
}

impl Default for AccuracyOptions {
    fn default() -> Self {
        Self {
            include_functional: false,
            failure_policy: JudgeFailurePolicy::CountIncorrect,
        }
    }
}

/// Verdicts for one QA set together with the items they refer to.
#[derive(Debug, Clone, Copy)]
pub struct VerdictSet<'a> {
    pub condition: ConditionKind,
    pub items: &'a [QAItem],
    pub verdicts: &'a [Verdict],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCell {
    pub n_questions: usize,
    pub n_correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub cells: BTreeMap<(QACategory, ConditionKind), AccuracyCell>,
}

impl AccuracyTable {
    pub fn get(&self, category: QACategory, condition: ConditionKind) -> Option<&AccuracyCell> {
        self.cells.get(&(category, condition))
    }

    /// Pooled accuracy over all categories of one condition.
    pub fn overall(&self, condition: ConditionKind) -> Option<AccuracyCell> {
        let (n, k) = self
            .cells
            .iter()
            .filter(|((_, c), _)| *c == condition)
            .fold((0, 0), |(n, k), (_, cell)| (n + cell.n_questions, k + cell.n_correct));
        (n > 0).then(|| AccuracyCell {
            n_questions: n,
            n_correct: k,
            accuracy: k as f64 / n as f64,
        })
    }
}

/// Groups verdicts by (category, condition) and computes the share correct.
///
/// Functional-relation questions are left out unless enabled. Groups with no
/// questions do not appear in the table.
pub fn compute_accuracy(sets: &[VerdictSet], opts: AccuracyOptions) -> Result<AccuracyTable> {
    let mut tally: BTreeMap<(QACategory, ConditionKind), (usize, usize)> = BTreeMap::new();
    for set in sets {
        let by_id: HashMap<&str, &QAItem> = set.items.iter().map(|i| (i.qa_id.as_str(), i)).collect();
        for v in set.verdicts {
            let item = by_id
                .get(v.qa_id.as_str())
                .ok_or_else(|| Error::Contract(format!("verdict for unknown question {}", v.qa_id)))?;
            if !item.is_validated() {
                return Err(Error::Contract(format!("verdict for unvalidated question {}", v.qa_id)));
            }
            if item.category == QACategory::RelationsFunctional && !opts.include_functional {
                continue;
            }
            if v.judge_failed && opts.failure_policy == JudgeFailurePolicy::Exclude {
                continue;
            }
            let entry = tally.entry((item.category, set.condition)).or_default();
            entry.0 += 1;
            entry.1 += usize::from(v.correct && !v.judge_failed);
        }
    }
    Ok(AccuracyTable {
        cells: tally
            .into_iter()
            .map(|(k, (n, c))| {
                (
                    k,
                    AccuracyCell {
                        n_questions: n,
                        n_correct: c,
                        accuracy: c as f64 / n as f64,
                    },
                )
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::item::QAStatus;
    use crate::judge::JudgeMethod;

    fn item(id: usize, category: QACategory) -> QAItem {
        QAItem {
            qa_id: format!("q{id}"),
            category,
            question: "?".into(),
            gt_answer: "yes".into(),
            source_frames: vec![],
            referenced_objects: vec![],
            status: QAStatus::Validated,
        }
    }

    fn verdict(id: usize, correct: bool) -> Verdict {
        Verdict {
            qa_id: format!("q{id}"),
            correct,
            method: JudgeMethod::Exact,
            rationale: String::new(),
            judge_failed: false,
        }
    }

    #[test]
    fn seven_of_ten() {
        let items: Vec<QAItem> = (0..10).map(|i| item(i, QACategory::BinaryGeneral)).collect();
        let verdicts: Vec<Verdict> = (0..10).map(|i| verdict(i, i < 7)).collect();
        let t = compute_accuracy(
            &[VerdictSet { condition: ConditionKind::Baseline, items: &items, verdicts: &verdicts }],
            AccuracyOptions::default(),
        )
        .unwrap();
        assert_eq!(t.cells.len(), 1);
        assert_eq!(t.get(QACategory::BinaryGeneral, ConditionKind::Baseline).unwrap().accuracy, 0.7);
    }

    #[test]
    fn functional_excluded_by_default() {
        let cats = [
            QACategory::BinaryGeneral,
            QACategory::RelationsFunctional,
            QACategory::Comparison,
            QACategory::RelationsFunctional,
            QACategory::Comparison,
        ];
        let items: Vec<QAItem> = cats.iter().enumerate().map(|(i, c)| item(i, *c)).collect();
        let verdicts: Vec<Verdict> = (0..5).map(|i| verdict(i, i % 2 == 0)).collect();
        let set = [VerdictSet { condition: ConditionKind::Velocity, items: &items, verdicts: &verdicts }];
        let t = compute_accuracy(&set, AccuracyOptions::default()).unwrap();
        assert!(t.cells.keys().all(|(c, _)| *c != QACategory::RelationsFunctional));
        assert_eq!(t.overall(ConditionKind::Velocity).unwrap().n_questions, 3);
        let with = compute_accuracy(&set, AccuracyOptions { include_functional: true, ..Default::default() }).unwrap();
        assert_eq!(with.get(QACategory::RelationsFunctional, ConditionKind::Velocity).unwrap().n_questions, 2);
    }

    #[test]
    fn unknown_id_is_contract_violation() {
        let items = vec![item(0, QACategory::BinaryGeneral)];
        let verdicts = vec![verdict(9, true)];
        let set = [VerdictSet { condition: ConditionKind::Baseline, items: &items, verdicts: &verdicts }];
        assert!(matches!(compute_accuracy(&set, AccuracyOptions::default()), Err(Error::Contract(_))));
    }

    #[test]
    fn judge_failures_follow_policy() {
        let items = vec![item(0, QACategory::Comparison), item(1, QACategory::Comparison)];
        let mut failed = verdict(1, false);
        failed.judge_failed = true;
        let verdicts = vec![verdict(0, true), failed];
        let set = [VerdictSet { condition: ConditionKind::Baseline, items: &items, verdicts: &verdicts }];
        let counted = compute_accuracy(&set, AccuracyOptions::default()).unwrap();
        assert_eq!(counted.get(QACategory::Comparison, ConditionKind::Baseline).unwrap().accuracy, 0.5);
        let excluded = compute_accuracy(
            &set,
            AccuracyOptions { failure_policy: JudgeFailurePolicy::Exclude, ..Default::default() },
        )
        .unwrap();
        assert_eq!(excluded.get(QACategory::Comparison, ConditionKind::Baseline).unwrap().accuracy, 1.0);
    }
}
