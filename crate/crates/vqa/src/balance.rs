use std::collections::BTreeMap;

use mapeval_core::labels::normalize_label;
use serde::{Deserialize, Serialize};

use crate::category::QACategory;
use crate::error::{Error, Result};
use crate::item::QAItem;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    /// `(qa_id, object)` for every item removed, in removal order.
    pub removed: Vec<(String, String)>,
    /// Surviving items per category after balancing.
    pub category_counts: BTreeMap<QACategory, usize>,
}

fn objects_of(item: &QAItem) -> Vec<String> {
    let mut objs: Vec<String> = item.referenced_objects.iter().map(|o| normalize_label(o)).collect();
    objs.sort();
    objs.dedup();
    objs
}

/// Caps how often a single object may be the subject of surviving questions.
///
/// While some object's share of the surviving items exceeds
/// `max_object_share`, the item with the highest `qa_id` among those that
/// reference the most over-represented object is rejected (ties between
/// objects go to the alphabetically first name). Objects referenced by a
/// single item are never trimmed, which is why the guaranteed bound carries a
/// slack of one item. Rejected items are ignored throughout.
pub fn balance_questions(items: &[QAItem], max_object_share: f64) -> Result<(Vec<QAItem>, BalanceReport)> {
    if !(max_object_share > 0.0 && max_object_share <= 1.0) {
        return Err(Error::Param(format!("max_object_share {max_object_share} must be in (0, 1]")));
    }
    let mut items = items.to_vec();
    let objects: Vec<Vec<String>> = items.iter().map(objects_of).collect();
    let mut live: Vec<bool> = items.iter().map(|i| !i.is_rejected()).collect();
    let mut report = BalanceReport::default();

    loop {
        let n = live.iter().filter(|l| **l).count();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for (objs, _) in objects.iter().zip(&live).filter(|(_, l)| **l) {
            for o in objs {
                *counts.entry(o).or_default() += 1;
            }
        }
        let worst = counts
            .iter()
            .filter(|(_, &c)| c > 1 && c as f64 > max_object_share * n as f64 + 1e-9)
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)));
        let Some((&object, _)) = worst else { break };
        let victim = (0..items.len())
            .filter(|&i| live[i] && objects[i].iter().any(|o| o == object))
            .max_by(|&a, &b| items[a].qa_id.cmp(&items[b].qa_id))
            .expect("object has live items");
        let object = object.to_string();
        live[victim] = false;
        items[victim].reject(format!("over-represented: {object}"));
        report.removed.push((items[victim].qa_id.clone(), object));
    }

    for item in items.iter().filter(|i| !i.is_rejected()) {
        *report.category_counts.entry(item.category).or_default() += 1;
    }
    Ok((items, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::item::QAStatus;
    use proptest::prelude::*;

    fn item(id: usize, objs: &[&str]) -> QAItem {
        QAItem {
            qa_id: format!("q-{id:03}"),
            category: QACategory::BinaryGeneral,
            question: format!("question {id}"),
            gt_answer: "yes".into(),
            source_frames: vec![],
            referenced_objects: objs.iter().map(|s| s.to_string()).collect(),
            status: QAStatus::Validated,
        }
    }

    fn max_share(items: &[QAItem]) -> (f64, usize) {
        let live: Vec<&QAItem> = items.iter().filter(|i| !i.is_rejected()).collect();
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for i in &live {
            for o in objects_of(i) {
                *counts.entry(o).or_default() += 1;
            }
        }
        let worst = counts.values().copied().max().unwrap_or(0);
        (worst as f64 / live.len().max(1) as f64, live.len())
    }

    #[test]
    fn trims_dominant_object_from_the_top() {
        let mut items: Vec<QAItem> = (0..10).map(|i| item(i, &["sofa"])).collect();
        items.extend((10..20).map(|i| item(i, &[["tv", "lamp", "bed", "rug", "desk"][i % 5]])));
        let (out, report) = balance_questions(&items, 0.3).unwrap();
        let sofa_left = out.iter().filter(|i| !i.is_rejected() && i.referenced_objects[0] == "sofa").count();
        assert!(sofa_left <= 6);
        let removed: Vec<&str> = report.removed.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(removed[0], "q-009");
        assert!(report.removed.iter().all(|(_, o)| o == "sofa"));
        let (share, n) = max_share(&out);
        assert!(share <= 0.3 + 1.0 / n as f64);
    }

    #[test]
    fn untouched_when_within_cap() {
        let items: Vec<QAItem> = (0..10).map(|i| item(i, &[&format!("obj{i}")])).collect();
        assert_eq!(balance_questions(&items, 0.3).unwrap().0, items);
        let crowded: Vec<QAItem> = (0..10).map(|i| item(i, &["sofa"])).collect();
        assert_eq!(balance_questions(&crowded, 1.0).unwrap().0, crowded);
    }

    #[test]
    fn bad_cap() {
        assert!(balance_questions(&[], 0.0).is_err());
        assert!(balance_questions(&[], 1.5).is_err());
    }

    proptest! {
        #[test]
        fn cap_holds_with_slack(
            refs in proptest::collection::vec(proptest::collection::vec(0usize..6, 0..3), 1..60),
            cap in 0.05f64..1.0,
        ) {
            let names = ["sofa", "table", "chair", "lamp", "door", "bed"];
            let items: Vec<QAItem> = refs
                .iter()
                .enumerate()
                .map(|(i, r)| item(i, &r.iter().map(|&k| names[k]).collect::<Vec<_>>()))
                .collect();
            let (out, report) = balance_questions(&items, cap).unwrap();
            let live: Vec<&QAItem> = out.iter().filter(|i| !i.is_rejected()).collect();
            let n = live.len();
            for name in names {
                let c = live.iter().filter(|i| i.referenced_objects.iter().any(|o| o == name)).count();
                if n > 0 {
                    prop_assert!(c as f64 / n as f64 <= cap + 1.0 / n as f64 + 1e-12);
                }
            }
            prop_assert_eq!(report.removed.len(), items.len() - n);
            let (again, _) = balance_questions(&out, cap).unwrap();
            prop_assert_eq!(again, out);
        }
    }
}
