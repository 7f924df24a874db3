use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use mapeval_core::ingest::{load_point_cloud, SequenceSpec};
use mapeval_core::labels::{ClassVocabulary, LabelMatcher, MatchMode, TableEmbedding};
use mapeval_core::seg::{
    aggregate_conditions, compute_fmiou, compute_iou_per_class, compute_macc, evaluate_clouds, AssociationParams,
    ConditionAggregate, SegmentationResult,
};
use mapeval_core::ConditionKind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::app::Ctx;
use crate::config::{expand, MethodConfig};
use crate::layout::{self, StageDir};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Omission {
    pub method: String,
    pub scene: String,
    pub condition: ConditionKind,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegSummary {
    pub aggregates: Vec<ConditionAggregate>,
    /// Sequences without a result, with the reason.
    pub omitted: Vec<Omission>,
}

/// Path of one result file relative to the `seg` directory.
pub fn result_path(method: &str, scene: &str, condition: ConditionKind) -> PathBuf {
    PathBuf::from(method).join(layout::sequence_stem(scene, condition)).with_extension("json")
}

fn read_label_list(path: &std::path::Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

/// Predicted-id to GT-class table for a method with its own label list.
fn label_map(ctx: &Ctx, method: &MethodConfig, vocab: &ClassVocabulary) -> Result<Option<Vec<Option<usize>>>> {
    let Some(pattern) = &method.pred_labels else { return Ok(None) };
    let path = ctx.config.base_dir().join(pattern.replace("{method}", &method.name));
    let labels = read_label_list(&path)?;
    let s = &ctx.config.seg_eval;
    let matcher = match s.matcher {
        MatchMode::Exact => LabelMatcher::exact(),
        MatchMode::Embedding => {
            let table = s.embedding_table.as_ref().expect("checked when loading the config");
            LabelMatcher::embedding(Arc::new(TableEmbedding::load(table)?), s.similarity_threshold)?
        }
    };
    let map = matcher.match_all(&labels, vocab)?;
    for (label, hit) in labels.iter().zip(&map) {
        if hit.is_none() {
            log::warn!("{}: predicted label `{label}` matches no GT class", method.name);
        }
    }
    Ok(Some(map))
}

fn pred_path(ctx: &Ctx, method: &MethodConfig, scene: &str, seq: &SequenceSpec) -> Option<PathBuf> {
    match &method.pred_cloud {
        Some(p) => Some(expand(p, ctx.config.base_dir(), &method.name, scene, seq.condition)),
        None => seq.pred_cloud.clone(),
    }
}

pub fn run(ctx: &Ctx) -> Result<SegSummary> {
    let s = &ctx.config.seg_eval;
    let vocab = ClassVocabulary::load(&ctx.manifest.class_vocabulary_path)?;
    let methods = ctx.methods();
    let maps: Vec<Option<Vec<Option<usize>>>> =
        methods.iter().map(|m| label_map(ctx, m, &vocab)).collect::<Result<_>>()?;
    let params = AssociationParams {
        radius: s.radius,
        matcher: s.matcher,
        similarity_threshold: (s.matcher == MatchMode::Embedding).then_some(s.similarity_threshold),
    };

    let sequences: Vec<_> = ctx.manifest.sequences().collect();
    let outcomes: Vec<Vec<Result<SegmentationResult, Omission>>> = sequences
        .par_iter()
        .map(|(scene, seq)| {
            let omit = |method: &str, reason: String| Omission {
                method: method.to_string(),
                scene: scene.scene_id.clone(),
                condition: seq.condition,
                reason,
            };
            let gt = match load_point_cloud(&seq.gt_cloud, &s.label_field) {
                Ok(gt) => gt,
                Err(e) => return methods.iter().map(|m| Err(omit(&m.name, format!("ground truth: {e}")))).collect(),
            };
            methods
                .iter()
                .zip(&maps)
                .map(|(m, map)| {
                    let path = pred_path(ctx, m, &scene.scene_id, seq).ok_or_else(|| omit(&m.name, "no prediction configured".into()))?;
                    if !path.is_file() {
                        return Err(omit(&m.name, format!("prediction {} does not exist", path.display())));
                    }
                    let scored = load_point_cloud(&path, &s.label_field)
                        .and_then(|pred| evaluate_clouds(&gt, &pred, vocab.len(), map.as_deref(), s.radius))
                        .and_then(|cm| Ok((compute_macc(&cm)?, compute_fmiou(&cm)?, cm)));
                    let (macc, fmiou, cm) = scored.map_err(|e| omit(&m.name, e.to_string()))?;
                    Ok(SegmentationResult {
                        method: m.name.clone(),
                        scene_id: scene.scene_id.clone(),
                        condition: seq.condition,
                        macc,
                        fmiou,
                        per_class_iou: compute_iou_per_class(&cm),
                        class_point_counts: (0..cm.class_count()).map(|c| cm.gt_points(c)).collect(),
                        params: params.clone(),
                    })
                })
                .collect()
        })
        .collect();

    let stage = StageDir::begin(&ctx.config.output_dir, layout::SEG)?;
    let mut results = Vec::new();
    let mut omitted = Vec::new();
    for outcome in outcomes.into_iter().flatten() {
        match outcome {
            Ok(r) => {
                stage.write_json(result_path(&r.method, &r.scene_id, r.condition), &r)?;
                results.push(r);
            }
            Err(o) => {
                log::warn!("{}/{}/{}: omitted: {}", o.method, o.scene, o.condition, o.reason);
                omitted.push(o);
            }
        }
    }
    let aggregates = if results.is_empty() { Vec::new() } else { aggregate_conditions(&results)? };
    let summary = SegSummary { aggregates, omitted };
    stage.write_json("summary.json", &summary)?;
    let dir = stage.commit()?;
    log::info!("{} segmentation result(s) written to {}", results.len(), dir.display());
    Ok(summary)
}
