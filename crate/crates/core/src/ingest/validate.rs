use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Error;
use crate::ingest::{load_point_cloud, load_scene_graph, DatasetManifest, SequenceSpec};
use crate::labels::ClassVocabulary;
use crate::scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Severity {
    Warning,
    Fatal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum IssueCode {
    EmptyManifest,
    InvalidVocabulary,
    MissingFile,
    UnreadableCloud,
    EmptyCloud,
    NonFinitePoint,
    MissingPrediction,
    MissingSceneGraph,
    InvalidSceneGraph,
    MissingKeyframes,
    EmptyKeyframes,
    InvalidScenario,
    PlaceholderScenario,
}

impl IssueCode {
    pub fn severity(self) -> Severity {
        match self {
            IssueCode::PlaceholderScenario => Severity::Warning,
            _ => Severity::Fatal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub code: IssueCode,
    pub severity: Severity,
    pub message: String,
}

impl Issue {
    pub fn new(code: IssueCode, message: impl Into<String>) -> Self {
        Self {
            code,
            severity: code.severity(),
            message: message.into(),
        }
    }

    pub fn is_fatal(&self) -> bool {
        self.severity == Severity::Fatal
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Fatal => "error",
        };
        write!(f, "{sev} [{:?}] {}", self.code, self.message)
    }
}

/// What a sequence is expected to provide for the stages queued on it.
#[derive(Debug, Clone)]
pub struct ValidationOptions {
    pub label_field: String,
    pub require_prediction: bool,
    pub require_scene_graph: bool,
    pub require_keyframes: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            label_field: crate::ingest::ply::DEFAULT_LABEL_FIELD.to_string(),
            require_prediction: false,
            require_scene_graph: false,
            require_keyframes: false,
        }
    }
}

const KEYFRAME_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "ppm"];

/// Image files of a keyframe directory, sorted by file name.
pub fn list_keyframes(dir: &Path) -> crate::Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut frames: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| KEYFRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    frames.sort();
    Ok(frames)
}

fn check_cloud(path: &Path, role: &str, opts: &ValidationOptions, issues: &mut Vec<Issue>) {
    if !path.is_file() {
        issues.push(Issue::new(IssueCode::MissingFile, format!("{role} {} does not exist", path.display())));
        return;
    }
    match load_point_cloud(path, &opts.label_field) {
        Err(e) => issues.push(Issue::new(IssueCode::UnreadableCloud, format!("{role}: {e}"))),
        Ok(cloud) => {
            if cloud.is_empty() {
                issues.push(Issue::new(IssueCode::EmptyCloud, format!("{role} {} has no points", path.display())));
            }
            let bad = cloud.non_finite_count();
            if bad > 0 {
                issues.push(Issue::new(
                    IssueCode::NonFinitePoint,
                    format!("{role} {} has {bad} non-finite point(s)", path.display()),
                ));
            }
        }
    }
}

/// Check every file a sequence references. Never fails; problems come back
/// as structured issues in a deterministic order.
pub fn validate_sequence(spec: &SequenceSpec, opts: &ValidationOptions) -> Vec<Issue> {
    let mut issues = Vec::new();
    check_cloud(&spec.gt_cloud, "gt_cloud", opts, &mut issues);

    match &spec.pred_cloud {
        Some(pred) => check_cloud(pred, "pred_cloud", opts, &mut issues),
        None if opts.require_prediction => issues.push(Issue::new(
            IssueCode::MissingPrediction,
            format!("no pred_cloud for condition `{}`", spec.condition),
        )),
        None => {}
    }

    match &spec.scene_graph {
        Some(path) => {
            if let Err(e) = load_scene_graph(path) {
                let code = match e {
                    Error::Io { .. } => IssueCode::MissingFile,
                    _ => IssueCode::InvalidSceneGraph,
                };
                issues.push(Issue::new(code, e.to_string()));
            }
        }
        None if opts.require_scene_graph => issues.push(Issue::new(
            IssueCode::MissingSceneGraph,
            format!("no scene_graph for condition `{}`", spec.condition),
        )),
        None => {}
    }

    match &spec.keyframes_dir {
        Some(dir) => match list_keyframes(dir) {
            Err(e) => issues.push(Issue::new(IssueCode::MissingKeyframes, e.to_string())),
            Ok(frames) if frames.is_empty() => issues.push(Issue::new(
                IssueCode::EmptyKeyframes,
                format!("keyframes_dir {} contains no images", dir.display()),
            )),
            Ok(_) => {}
        },
        None if opts.require_keyframes => issues.push(Issue::new(
            IssueCode::MissingKeyframes,
            format!("no keyframes_dir for condition `{}`", spec.condition),
        )),
        None => {}
    }

    if let Some(path) = &spec.scenario_config {
        match scenario::load_condition_config(path) {
            Err(e) => issues.push(Issue::new(IssueCode::InvalidScenario, e.to_string())),
            Ok(cfg) => {
                if cfg.condition != spec.condition {
                    issues.push(Issue::new(
                        IssueCode::InvalidScenario,
                        format!(
                            "{} describes `{}` but the sequence is `{}`",
                            path.display(),
                            cfg.condition,
                            spec.condition
                        ),
                    ));
                }
                for warning in cfg.warnings() {
                    issues.push(Issue::new(IssueCode::PlaceholderScenario, format!("{}: {warning}", path.display())));
                }
            }
        }
    }
    issues
}

/// Validate the vocabulary and every sequence. Each issue is tagged with its
/// `scene/condition` location (empty for dataset-level issues).
pub fn validate_manifest(manifest: &DatasetManifest, opts: &ValidationOptions) -> Vec<(String, Issue)> {
    let mut out = Vec::new();
    if manifest.scenes.is_empty() {
        out.push((String::new(), Issue::new(IssueCode::EmptyManifest, "manifest lists no scenes")));
    }
    if let Err(e) = ClassVocabulary::load(&manifest.class_vocabulary_path) {
        out.push((String::new(), Issue::new(IssueCode::InvalidVocabulary, e.to_string())));
    }
    for (scene, seq) in manifest.sequences() {
        let at = format!("{}/{}", scene.scene_id, seq.condition);
        out.extend(validate_sequence(seq, opts).into_iter().map(|i| (at.clone(), i)));
    }
    out
}
