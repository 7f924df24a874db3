use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mapeval_core::ingest::{load_scene_graph, SceneEntry, SequenceSpec};
use mapeval_core::ConditionKind;
use mapeval_vqa::describe::SceneDescription;
use mapeval_vqa::store::{self, AnswerSetHeader, QaSetHeader, VerdictSetHeader};
use mapeval_vqa::template::{evaluation_templates, generation_templates, hashes};
use mapeval_vqa::{
    aggregate_descriptions, answer::answer_all, balance_questions, compute_accuracy, describe_frames, generate_questions,
    judge, sample_keyframes, validate_questions, AccuracyOptions, AnsweredBy, BalanceReport, FrameSample,
    GenerationParams, GenerationSummary, QACategory, QAItem, SystemAnswer, UnifiedDescription, Verdict, VerdictSet,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::app::Ctx;
use crate::config::{expand, MethodConfig};
use crate::layout::{self, StageDir};

pub const DESCRIPTIONS: &str = "descriptions.json";
pub const GENERATED: &str = "generated.jsonl";
pub const GENERATION_SUMMARY: &str = "summary.json";
pub const QA_SET: &str = "qa_set.jsonl";
pub const BALANCE: &str = "balance.json";
pub const ACCURACY: &str = "accuracy.json";

/// Everything `qa-validate` needs from `qa-gen` besides the questions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescriptionRecord {
    pub frames: Vec<FrameSample>,
    pub descriptions: Vec<SceneDescription>,
    pub unified: UnifiedDescription,
}

/// One line of `accuracy.json`. `category` is absent on the pooled row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<QACategory>,
    pub condition: ConditionKind,
    pub n_questions: usize,
    pub n_correct: usize,
    pub accuracy: f64,
}

/// Direct answer record supplied by a method.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectAnswer {
    qa_id: String,
    answer: String,
}

fn temperature_map(ctx: &Ctx) -> BTreeMap<String, f64> {
    let t = ctx.config.vqa.temperatures();
    [
        ("answer", t.answer),
        ("describe", t.describe),
        ("generate", t.generate),
        ("judge", 0.0),
        ("validate", t.validate),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Sequences with keyframes, in manifest order.
fn vqa_sequences(ctx: &Ctx) -> Vec<(&SceneEntry, &SequenceSpec)> {
    ctx.manifest
        .sequences()
        .filter(|(scene, seq)| {
            let has = seq.keyframes_dir.is_some();
            if !has {
                log::warn!("{}/{}: no keyframes_dir, skipped for VQA", scene.scene_id, seq.condition);
            }
            has
        })
        .collect()
}

fn qa_set_path(ctx: &Ctx, scene: &str, condition: ConditionKind) -> PathBuf {
    ctx.config
        .output_dir
        .join(layout::QA)
        .join(layout::sequence_stem(scene, condition))
        .join(QA_SET)
}

fn record_path(method: &str, scene: &str, condition: ConditionKind) -> PathBuf {
    Path::new(method).join(layout::sequence_stem(scene, condition)).with_extension("jsonl")
}

/// Describes keyframes and generates questions for every sequence.
pub fn generate(ctx: &Ctx) -> Result<Vec<GenerationSummary>> {
    let gw = ctx.gateway()?;
    let llm = ctx.llm(&gw);
    let quotas = ctx.config.vqa.quota()?;
    let n_total = ctx.n_total();
    let seed = ctx.config.vqa.seed;
    let sequences = vqa_sequences(ctx);

    let stage = StageDir::begin(&ctx.config.output_dir, layout::QA_GEN)?;
    let templates = hashes(&generation_templates());
    let summaries: Vec<GenerationSummary> = sequences
        .par_iter()
        .map(|(scene, seq)| -> Result<GenerationSummary> {
            let dir = seq.keyframes_dir.as_ref().expect("filtered above");
            let frames = sample_keyframes(dir, &scene.scene_id, seq.condition, ctx.config.vqa.sampling)?;
            let descriptions = describe_frames(&llm, &frames)?;
            let unified = aggregate_descriptions(&descriptions);
            let params = GenerationParams {
                scene_id: scene.scene_id.clone(),
                condition: seq.condition,
                quotas: quotas.clone(),
                n_total,
                seed,
            };
            let (items, summary) = generate_questions(&llm, &unified, &params)
                .with_context(|| format!("generating questions for {}/{}", scene.scene_id, seq.condition))?;
            let header = QaSetHeader {
                dataset: ctx.manifest.dataset_name.clone(),
                scene: scene.scene_id.clone(),
                condition: seq.condition,
                quotas: store::quota_map(&quotas),
                n_total,
                seed,
                model_id: ctx.config.gateway.model_id.clone(),
                temperatures: temperature_map(ctx),
                templates: templates.clone(),
            };
            let stem = layout::sequence_stem(&scene.scene_id, seq.condition);
            stage.write_json(stem.join(DESCRIPTIONS), &DescriptionRecord { frames, descriptions, unified })?;
            stage.write(stem.join(GENERATED), store::to_jsonl(&header, &items))?;
            stage.write_json(stem.join(GENERATION_SUMMARY), &summary)?;
            Ok(summary)
        })
        .collect::<Result<_>>()?;
    let dir = stage.commit()?;
    log::info!("questions for {} sequence(s) written to {}", summaries.len(), dir.display());
    Ok(summaries)
}

/// Filters and balances generated questions into the final QA sets.
pub fn validate(ctx: &Ctx) -> Result<Vec<BalanceReport>> {
    let gw = ctx.gateway()?;
    let llm = ctx.llm(&gw);
    let cap = ctx.config.vqa.max_object_share;
    let gen_root = ctx.config.output_dir.join(layout::QA_GEN);
    let sequences = vqa_sequences(ctx);

    let stage = StageDir::begin(&ctx.config.output_dir, layout::QA)?;
    let reports: Vec<BalanceReport> = sequences
        .par_iter()
        .map(|(scene, seq)| -> Result<BalanceReport> {
            let stem = layout::sequence_stem(&scene.scene_id, seq.condition);
            let dir = gen_root.join(&stem);
            let generated = dir.join(GENERATED);
            if !generated.is_file() {
                bail!("{} does not exist; run qa-gen first", generated.display());
            }
            let (header, items): (QaSetHeader, Vec<QAItem>) = store::read_jsonl(&generated)?;
            let record: DescriptionRecord = layout::read_json(&dir.join(DESCRIPTIONS))?;
            let checked = validate_questions(&llm, &items, &record.unified, &record.frames)
                .with_context(|| format!("validating questions for {}/{}", scene.scene_id, seq.condition))?;
            let (balanced, report) = balance_questions(&checked, cap)?;
            let kept = balanced.iter().filter(|i| i.is_validated()).count();
            log::info!("{}/{}: {kept} of {} question(s) kept", scene.scene_id, seq.condition, balanced.len());
            stage.write(stem.join(QA_SET), store::to_jsonl(&header, &balanced))?;
            stage.write_json(stem.join(BALANCE), &report)?;
            Ok(report)
        })
        .collect::<Result<_>>()?;
    stage.commit()?;
    Ok(reports)
}

fn direct_answers(path: &Path, items: &[QAItem]) -> Result<Vec<SystemAnswer>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut given = HashMap::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let a: DirectAnswer =
            serde_json::from_str(line).with_context(|| format!("{}:{}: malformed answer", path.display(), n + 1))?;
        given.insert(a.qa_id, a.answer);
    }
    Ok(items
        .iter()
        .filter(|i| i.is_validated())
        .map(|i| {
            let answer = given.remove(&i.qa_id).unwrap_or_else(|| {
                log::warn!("{}: no answer for {}", path.display(), i.qa_id);
                String::new()
            });
            SystemAnswer {
                qa_id: i.qa_id.clone(),
                answer,
                answered_by: AnsweredBy::Direct,
            }
        })
        .collect())
}

/// Answers every validated question for every method.
pub fn answer(ctx: &Ctx) -> Result<usize> {
    let methods = ctx.methods();
    let needs_llm = methods.iter().any(|m| m.answers.is_none());
    let gw = if needs_llm { Some(ctx.gateway()?) } else { None };
    let base = ctx.config.base_dir();
    let answer_temperature = ctx.config.vqa.temperatures().answer;

    let jobs: Vec<(&MethodConfig, &SceneEntry, &SequenceSpec)> = methods
        .iter()
        .flat_map(|m| vqa_sequences(ctx).into_iter().map(move |(s, q)| (m, s, q)))
        .collect();
    let stage = StageDir::begin(&ctx.config.output_dir, layout::ANSWERS)?;
    let written: Vec<bool> = jobs
        .par_iter()
        .map(|&(m, scene, seq)| -> Result<_> {
            let qa_path = qa_set_path(ctx, &scene.scene_id, seq.condition);
            if !qa_path.is_file() {
                bail!("{} does not exist; run qa-validate first", qa_path.display());
            }
            let (qa, items) = store::load_qa_set(&qa_path)?;
            let mut header = AnswerSetHeader {
                dataset: qa.dataset,
                scene: scene.scene_id.clone(),
                condition: seq.condition,
                method: m.name.clone(),
                model_id: String::new(),
                temperature: 0.0,
                templates: BTreeMap::new(),
            };
            if let Some(pattern) = &m.answers {
                let path = expand(pattern, base, &m.name, &scene.scene_id, seq.condition);
                if !path.is_file() {
                    log::warn!("{}: {} does not exist, sequence skipped", m.name, path.display());
                    return Ok(false);
                }
                let answers = direct_answers(&path, &items)?;
                stage.write(record_path(&m.name, &scene.scene_id, seq.condition), store::to_jsonl(&header, &answers))?;
                return Ok(true);
            }
            let graph_path = match &m.scene_graph {
                Some(p) => Some(expand(p, base, &m.name, &scene.scene_id, seq.condition)),
                None => seq.scene_graph.clone(),
            };
            let Some(graph_path) = graph_path.filter(|p| p.is_file()) else {
                log::warn!("{}: no scene graph for {}/{}, sequence skipped", m.name, scene.scene_id, seq.condition);
                return Ok(false);
            };
            let graph = load_scene_graph(&graph_path)?;
            let llm = ctx.llm(gw.as_ref().expect("created when any method needs it"));
            let answers = answer_all(&llm, &graph, &items)
                .with_context(|| format!("answering for {} on {}/{}", m.name, scene.scene_id, seq.condition))?;
            header.model_id = ctx.config.gateway.model_id.clone();
            header.temperature = answer_temperature;
            header.templates = hashes(&evaluation_templates());
            stage.write(record_path(&m.name, &scene.scene_id, seq.condition), store::to_jsonl(&header, &answers))?;
            Ok(true)
        })
        .collect::<Result<_>>()?;

    stage.commit()?;
    Ok(written.into_iter().filter(|w| *w).count())
}

/// Judges every answer set and computes accuracy per method.
pub fn evaluate(ctx: &Ctx) -> Result<Vec<AccuracyRow>> {
    let gw = ctx.gateway()?;
    let llm = ctx.llm(&gw);
    let answers_root = ctx.config.output_dir.join(layout::ANSWERS);
    let answer_files = layout::files_with_ext(&answers_root, "jsonl")?;
    if answer_files.is_empty() {
        bail!("no answers under {}; run qa-answer first", answers_root.display());
    }

    let stage = StageDir::begin(&ctx.config.output_dir, layout::VERDICTS)?;
    type Judged = (VerdictSetHeader, Vec<QAItem>, Vec<Verdict>);
    let outputs: Vec<Judged> = answer_files
        .par_iter()
        .map(|path| -> Result<Judged> {
            let (ah, answers) = store::load_answers(path)?;
            let (_, items) = store::load_qa_set(&qa_set_path(ctx, &ah.scene, ah.condition))?;
            let by_id: HashMap<&str, &QAItem> = items.iter().map(|i| (i.qa_id.as_str(), i)).collect();
            let verdicts = answers
                .par_iter()
                .map(|a| {
                    let item = by_id
                        .get(a.qa_id.as_str())
                        .with_context(|| format!("{}: answer for unknown question {}", path.display(), a.qa_id))?;
                    Ok(judge(&llm, item, a)?)
                })
                .collect::<Result<Vec<_>>>()?;
            let header = VerdictSetHeader {
                dataset: ah.dataset,
                scene: ah.scene,
                condition: ah.condition,
                method: ah.method,
                judge_model_id: ctx.config.gateway.model_id.clone(),
                judge_temperature: 0.0,
                templates: hashes(&evaluation_templates()),
            };
            stage.write(record_path(&header.method, &header.scene, header.condition), store::to_jsonl(&header, &verdicts))?;
            Ok((header, items, verdicts))
        })
        .collect::<Result<_>>()?;

    let opts = AccuracyOptions {
        include_functional: ctx.config.vqa.include_functional,
        failure_policy: ctx.config.vqa.judge_failure_policy,
    };
    let mut by_method: BTreeMap<&str, Vec<VerdictSet>> = BTreeMap::new();
    for (h, items, verdicts) in &outputs {
        let failed = verdicts.iter().filter(|v| v.judge_failed).count();
        if failed > 0 {
            log::warn!("{}/{}/{}: judge failed on {failed} question(s)", h.method, h.scene, h.condition);
        }
        by_method.entry(h.method.as_str()).or_default().push(VerdictSet {
            condition: h.condition,
            items,
            verdicts,
        });
    }
    let mut rows = Vec::new();
    for (method, sets) in by_method {
        let table = compute_accuracy(&sets, opts)?;
        for (&(category, condition), cell) in &table.cells {
            rows.push(AccuracyRow {
                method: method.to_string(),
                category: Some(category),
                condition,
                n_questions: cell.n_questions,
                n_correct: cell.n_correct,
                accuracy: cell.accuracy,
            });
        }
        for condition in ConditionKind::ALL {
            if let Some(cell) = table.overall(condition) {
                rows.push(AccuracyRow {
                    method: method.to_string(),
                    category: None,
                    condition,
                    n_questions: cell.n_questions,
                    n_correct: cell.n_correct,
                    accuracy: cell.accuracy,
                });
            }
        }
    }

    stage.write_json(ACCURACY, &rows)?;
    stage.commit()?;
    Ok(rows)
}
