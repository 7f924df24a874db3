use std::collections::{BTreeMap, BTreeSet};

use anyhow::{bail, Result};
use mapeval_core::seg::{compute_degradation, ConditionAggregate, Metric};
use mapeval_core::ConditionKind;
use mapeval_vqa::store::{self, QaSetHeader};
use mapeval_vqa::template::{evaluation_templates, generation_templates, hashes};
use mapeval_vqa::QACategory;
use serde::Serialize;

use super::qa::{AccuracyRow, ACCURACY, QA_SET};
use super::seg::{Omission, SegSummary};
use crate::app::Ctx;
use crate::layout::{self, StageDir};
use crate::render::{fixed, markdown_table, metric, percent, ranks};

#[derive(Debug, Clone, Serialize)]
pub struct QaSetInfo {
    pub scene: String,
    pub condition: ConditionKind,
    pub n_total: usize,
    pub seed: u64,
    pub model_id: String,
    pub temperatures: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub dataset: String,
    pub model_id: String,
    pub temperatures: BTreeMap<String, f64>,
    pub generation_templates: BTreeMap<String, String>,
    pub evaluation_templates: BTreeMap<String, String>,
    pub seed: u64,
    pub radius: f64,
    pub matcher: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity_threshold: Option<f64>,
    pub reference_condition: ConditionKind,
    pub include_functional: bool,
    /// As recorded in the QA set headers.
    pub qa_sets: Vec<QaSetInfo>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegradationRow {
    pub method: String,
    pub metric: Metric,
    pub condition: ConditionKind,
    /// Percent change against the reference condition.
    pub degradation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub metadata: Metadata,
    pub segmentation: Vec<ConditionAggregate>,
    pub degradation: Vec<DegradationRow>,
    pub accuracy: Vec<AccuracyRow>,
    pub omitted: Vec<Omission>,
    pub warnings: Vec<String>,
}

fn metadata(ctx: &Ctx) -> Result<Metadata> {
    let s = &ctx.config.seg_eval;
    let t = ctx.config.vqa.temperatures();
    let mut qa_sets = Vec::new();
    for (scene, seq) in ctx.manifest.sequences() {
        let path = ctx
            .config
            .output_dir
            .join(layout::QA)
            .join(layout::sequence_stem(&scene.scene_id, seq.condition))
            .join(QA_SET);
        if path.is_file() {
            let (h, _): (QaSetHeader, Vec<serde_json::Value>) = store::read_jsonl(&path)?;
            qa_sets.push(QaSetInfo {
                scene: h.scene,
                condition: h.condition,
                n_total: h.n_total,
                seed: h.seed,
                model_id: h.model_id,
                temperatures: h.temperatures,
            });
        }
    }
    Ok(Metadata {
        dataset: ctx.manifest.dataset_name.clone(),
        model_id: ctx.config.gateway.model_id.clone(),
        temperatures: [
            ("answer", t.answer),
            ("describe", t.describe),
            ("generate", t.generate),
            ("judge", 0.0),
            ("validate", t.validate),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect(),
        generation_templates: hashes(&generation_templates()),
        evaluation_templates: hashes(&evaluation_templates()),
        seed: ctx.config.vqa.seed,
        radius: s.radius,
        matcher: serde_json::to_value(s.matcher)?.as_str().unwrap_or_default().to_string(),
        similarity_threshold: (s.matcher == mapeval_core::labels::MatchMode::Embedding)
            .then_some(s.similarity_threshold),
        reference_condition: ctx.reference_condition(),
        include_functional: ctx.config.vqa.include_functional,
        qa_sets,
    })
}

/// Conditions that appear anywhere in `aggregates`, in canonical order.
fn present_conditions(aggregates: &[ConditionAggregate]) -> Vec<ConditionKind> {
    let seen: BTreeSet<ConditionKind> = aggregates.iter().flat_map(|a| a.per_condition.keys().copied()).collect();
    ConditionKind::ALL.into_iter().filter(|c| seen.contains(c)).collect()
}

fn method_fps(ctx: &Ctx, method: &str) -> Option<f64> {
    if let Some(m) = ctx.config.methods.iter().find(|m| m.name == method) {
        return m.fps;
    }
    // Without configured methods the manifest's per-sequence rate applies.
    let rates: Vec<f64> = ctx.manifest.sequences().filter_map(|(_, s)| s.method_fps).collect();
    (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
}

fn segmentation_section(ctx: &Ctx, aggregates: &[ConditionAggregate], out: &mut String) {
    let conditions = present_conditions(aggregates);
    for m in Metric::ALL {
        let rows: Vec<&ConditionAggregate> = aggregates.iter().filter(|a| a.metric == m).collect();
        let mut header = vec!["Method".to_string()];
        header.extend(conditions.iter().map(|c| c.title().to_string()));
        header.extend(["FPS", "Min", "Max", "Avg", "Rank"].map(String::from));
        let rank = ranks(&rows.iter().map(|a| Some(a.summary.avg)).collect::<Vec<_>>());
        let body: Vec<Vec<String>> = rows
            .iter()
            .zip(rank)
            .map(|(a, r)| {
                let mut cells = vec![a.method.clone()];
                cells.extend(conditions.iter().map(|c| a.per_condition.get(c).map_or("n/a".into(), |v| metric(*v))));
                cells.push(method_fps(ctx, &a.method).map_or("n/a".into(), |f| fixed(f, 2)));
                cells.extend([a.summary.min, a.summary.max, a.summary.avg].map(metric));
                cells.push(r.map_or(String::new(), |r| r.to_string()));
                cells
            })
            .collect();
        out.push_str(&format!("\n## Segmentation: {}\n\n", m.title()));
        out.push_str(&markdown_table(&header, &body));
    }
}

fn degradation_rows(aggregates: &[ConditionAggregate], reference: ConditionKind) -> Vec<DegradationRow> {
    let mut rows = Vec::new();
    for a in aggregates {
        let Some(&b) = a.per_condition.get(&reference) else { continue };
        for (&condition, &c) in &a.per_condition {
            if let Ok(d) = compute_degradation(b, c) {
                rows.push(DegradationRow {
                    method: a.method.clone(),
                    metric: a.metric,
                    condition,
                    degradation: d,
                });
            }
        }
    }
    rows
}

fn degradation_section(
    aggregates: &[ConditionAggregate],
    rows: &[DegradationRow],
    reference: ConditionKind,
    out: &mut String,
) {
    let conditions = present_conditions(aggregates);
    for m in Metric::ALL {
        let methods: Vec<&str> = aggregates.iter().filter(|a| a.metric == m).map(|a| a.method.as_str()).collect();
        let mut header = vec!["Method".to_string()];
        header.extend(conditions.iter().map(|c| c.title().to_string()));
        let body: Vec<Vec<String>> = methods
            .iter()
            .map(|method| {
                let mut cells = vec![method.to_string()];
                cells.extend(conditions.iter().map(|c| {
                    rows.iter()
                        .find(|r| r.method == *method && r.metric == m && r.condition == *c)
                        .map_or("n/a".into(), |r| percent(r.degradation))
                }));
                cells
            })
            .collect();
        out.push_str(&format!("\n## Degradation against {}: {}\n\n", reference.title(), m.title()));
        out.push_str(&markdown_table(&header, &body));
    }
}

fn accuracy_cell(v: f64) -> String {
    format!("{}%", fixed(v * 100.0, 2))
}

fn accuracy_section(rows: &[AccuracyRow], out: &mut String) {
    let methods: BTreeSet<&str> = rows.iter().map(|r| r.method.as_str()).collect();
    for method in methods {
        let mine: Vec<&AccuracyRow> = rows.iter().filter(|r| r.method == method).collect();
        let seen: BTreeSet<ConditionKind> = mine.iter().map(|r| r.condition).collect();
        let conditions: Vec<ConditionKind> = ConditionKind::ALL.into_iter().filter(|c| seen.contains(c)).collect();
        let mut header = vec!["Category".to_string()];
        header.extend(conditions.iter().map(|c| c.title().to_string()));
        let lookup = |cat: Option<QACategory>, cond: ConditionKind| {
            mine.iter()
                .find(|r| r.category == cat && r.condition == cond)
                .map_or("n/a".into(), |r| accuracy_cell(r.accuracy))
        };
        let categories: Vec<QACategory> = QACategory::ALL
            .into_iter()
            .filter(|c| mine.iter().any(|r| r.category == Some(*c)))
            .collect();
        let mut body: Vec<Vec<String>> = categories
            .iter()
            .map(|cat| {
                let mut cells = vec![cat.title().to_string()];
                cells.extend(conditions.iter().map(|c| lookup(Some(*cat), *c)));
                cells
            })
            .collect();
        let mut overall = vec!["Overall".to_string()];
        overall.extend(conditions.iter().map(|c| lookup(None, *c)));
        body.push(overall);
        out.push_str(&format!("\n## Question answering accuracy: {method}\n\n"));
        out.push_str(&markdown_table(&header, &body));
    }
}

fn metadata_section(meta: &Metadata, out: &mut String) {
    out.push_str("## Run settings\n\n");
    out.push_str(&format!("- Model: `{}`\n", meta.model_id));
    let temps: Vec<String> = meta.temperatures.iter().map(|(k, v)| format!("{k} {v}")).collect();
    out.push_str(&format!("- Temperatures: {}\n", temps.join(", ")));
    out.push_str(&format!("- Generation seed: {}\n", meta.seed));
    out.push_str(&format!("- Association radius: {} m\n", meta.radius));
    match meta.similarity_threshold {
        Some(t) => out.push_str(&format!("- Label matching: {} (threshold {t})\n", meta.matcher)),
        None => out.push_str(&format!("- Label matching: {}\n", meta.matcher)),
    }
    out.push_str(&format!("- Reference condition: {}\n", meta.reference_condition.title()));
    out.push_str(&format!(
        "- Functional relation questions: {}\n",
        if meta.include_functional { "included" } else { "excluded" }
    ));
    for q in &meta.qa_sets {
        out.push_str(&format!(
            "- QA set {}/{}: {} questions requested, seed {}, model `{}`\n",
            q.scene, q.condition, q.n_total, q.seed, q.model_id
        ));
    }
    out.push_str("- Template hashes (SHA-256):\n");
    for (name, hash) in meta.generation_templates.iter().chain(&meta.evaluation_templates) {
        out.push_str(&format!("  - `{name}`: `{hash}`\n"));
    }
}

fn to_csv(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

/// Renders Markdown, CSV and JSON reports from the stage outputs present.
pub fn run(ctx: &Ctx) -> Result<Report> {
    let root = &ctx.config.output_dir;
    let seg_path = root.join(layout::SEG).join("summary.json");
    let acc_path = root.join(layout::VERDICTS).join(ACCURACY);
    let seg: Option<SegSummary> = seg_path.is_file().then(|| layout::read_json(&seg_path)).transpose()?;
    let accuracy: Vec<AccuracyRow> = if acc_path.is_file() { layout::read_json(&acc_path)? } else { Vec::new() };
    if seg.is_none() && accuracy.is_empty() {
        bail!("nothing to report: run seg-eval or qa-eval first");
    }
    let meta = metadata(ctx)?;
    let reference = meta.reference_condition;
    let (aggregates, omitted) = seg.map(|s| (s.aggregates, s.omitted)).unwrap_or_default();
    let mut warnings = Vec::new();

    let mut md = format!("# Benchmark report: {}\n\n", meta.dataset);
    metadata_section(&meta, &mut md);

    let mut degradation = Vec::new();
    if !aggregates.is_empty() {
        segmentation_section(ctx, &aggregates, &mut md);
        if aggregates.iter().any(|a| a.per_condition.contains_key(&reference)) {
            degradation = degradation_rows(&aggregates, reference);
            degradation_section(&aggregates, &degradation, reference, &mut md);
        } else {
            warnings.push(format!(
                "reference condition `{reference}` has no segmentation results; degradation table omitted"
            ));
        }
    }
    if !accuracy.is_empty() {
        accuracy_section(&accuracy, &mut md);
    }
    if !omitted.is_empty() {
        md.push_str("\n## Omitted sequences\n\n");
        for o in &omitted {
            md.push_str(&format!("- {} on {}/{}: {}\n", o.method, o.scene, o.condition, o.reason));
        }
    }
    if !warnings.is_empty() {
        md.push_str("\n## Warnings\n\n");
        for w in &warnings {
            log::warn!("{w}");
            md.push_str(&format!("- {w}\n"));
        }
    }

    let stage = StageDir::begin(root, layout::REPORT)?;
    stage.write("report.md", &md)?;

    let conditions = present_conditions(&aggregates);
    let mut header: Vec<String> = vec!["method".into(), "metric".into()];
    header.extend(conditions.iter().map(|c| c.as_str().to_string()));
    header.extend(["min", "max", "avg", "fps"].map(String::from));
    let rows = aggregates.iter().map(|a| {
        let mut r = vec![a.method.clone(), a.metric.key().to_string()];
        r.extend(conditions.iter().map(|c| opt(a.per_condition.get(c).copied())));
        r.extend([a.summary.min, a.summary.max, a.summary.avg].map(|v| v.to_string()));
        r.push(opt(method_fps(ctx, &a.method)));
        r
    });
    stage.write("segmentation.csv", to_csv(&header, rows)?)?;

    let header = ["method", "metric", "reference", "condition", "degradation_percent"].map(String::from);
    let rows = degradation.iter().map(|d| {
        vec![
            d.method.clone(),
            d.metric.key().to_string(),
            reference.as_str().to_string(),
            d.condition.as_str().to_string(),
            d.degradation.to_string(),
        ]
    });
    stage.write("degradation.csv", to_csv(&header, rows)?)?;

    let header = ["method", "category", "condition", "n_questions", "n_correct", "accuracy"].map(String::from);
    let rows = accuracy.iter().map(|r| {
        vec![
            r.method.clone(),
            r.category.map_or("overall".to_string(), |c| c.as_str().to_string()),
            r.condition.as_str().to_string(),
            r.n_questions.to_string(),
            r.n_correct.to_string(),
            r.accuracy.to_string(),
        ]
    });
    stage.write("vqa_accuracy.csv", to_csv(&header, rows)?)?;

    let report = Report {
        metadata: meta,
        segmentation: aggregates,
        degradation,
        accuracy,
        omitted,
        warnings,
    };
    stage.write_json("report.json", &report)?;
    let dir = stage.commit()?;
    log::info!("report written to {}", dir.display());
    Ok(report)
}
