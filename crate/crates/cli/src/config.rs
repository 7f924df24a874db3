//! Run configuration (TOML). Every key has a default except `manifest`;
//! unknown keys are rejected. Relative paths resolve against the directory
//! holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mapeval_core::labels::{MatchMode, DEFAULT_SIMILARITY_THRESHOLD};
use mapeval_core::scenario::ScenarioDefaults;
use mapeval_core::seg::DEFAULT_RADIUS;
use mapeval_core::ConditionKind;
use mapeval_gateway::transport::Dialect;
use mapeval_gateway::{API_KEY_ENV, DEFAULT_MODEL_ID};
use mapeval_vqa::{CategoryQuota, JudgeFailurePolicy, QACategory, SamplingPolicy, Temperatures};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Condition degradation is measured against. Defaults to `baseline` when
    /// the manifest has baseline sequences, otherwise `nominal_lights`.
    #[serde(default)]
    pub reference_condition: Option<ConditionKind>,
    #[serde(default)]
    pub methods: Vec<MethodConfig>,
    #[serde(default)]
    pub gateway: GatewaySection,
    #[serde(default)]
    pub seg_eval: SegEvalSection,
    #[serde(default)]
    pub vqa: VqaSection,
    #[serde(default)]
    pub scenario: ScenarioDefaults,
    #[serde(skip)]
    base_dir_cache: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("mapeval-out")
}

/// One system under test. Path patterns may use `{method}`, `{scene}` and
/// `{condition}`; when a pattern is absent the manifest's per-sequence path
/// is used instead.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub name: String,
    #[serde(default)]
    pub pred_cloud: Option<String>,
    /// Label names for the predicted class ids, one per line. Without it the
    /// predicted ids are taken to be indices into the GT vocabulary.
    #[serde(default)]
    pub pred_labels: Option<String>,
    #[serde(default)]
    pub scene_graph: Option<String>,
    /// Answers produced by the method itself (JSON Lines, one
    /// `{"qa_id", "answer"}` record per line). When set, scene-graph
    /// answering is skipped for this method.
    #[serde(default)]
    pub answers: Option<String>,
    #[serde(default)]
    pub fps: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewaySection {
    pub endpoint: String,
    pub dialect: Dialect,
    pub model_id: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub max_in_flight: usize,
    pub requests_per_minute: Option<f64>,
    pub max_attempts: u32,
    pub backoff_base_secs: f64,
    pub backoff_factor: f64,
    pub jitter: f64,
    pub structured_retries: u32,
    pub timeout_secs: f64,
    /// Replay store directory; `--replay-dir` overrides it.
    pub replay_dir: Option<PathBuf>,
}

impl Default for GatewaySection {
    fn default() -> Self {
        Self {
            endpoint: "https://generativelanguage.googleapis.com/v1beta/openai/chat/completions".into(),
            dialect: Dialect::OpenaiChat,
            model_id: DEFAULT_MODEL_ID.into(),
            api_key_env: API_KEY_ENV.into(),
            max_in_flight: 4,
            requests_per_minute: None,
            max_attempts: 3,
            backoff_base_secs: 1.0,
            backoff_factor: 2.0,
            jitter: 0.2,
            structured_retries: 2,
            timeout_secs: 120.0,
            replay_dir: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegEvalSection {
    pub radius: f64,
    pub label_field: String,
    pub matcher: MatchMode,
    pub similarity_threshold: f64,
    /// JSON object mapping label text to an embedding vector; required by the
    /// embedding matcher.
    pub embedding_table: Option<PathBuf>,
}

impl Default for SegEvalSection {
    fn default() -> Self {
        Self {
            radius: DEFAULT_RADIUS,
            label_field: mapeval_core::ingest::ply::DEFAULT_LABEL_FIELD.into(),
            matcher: MatchMode::Exact,
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            embedding_table: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemperatureSection {
    pub describe: f64,
    pub generate: f64,
    pub validate: f64,
    pub answer: f64,
}

impl Default for TemperatureSection {
    fn default() -> Self {
        let t = Temperatures::default();
        Self {
            describe: t.describe,
            generate: t.generate,
            validate: t.validate,
            answer: t.answer,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VqaSection {
    /// Category ratios; omitted categories get 0. Defaults to the reference distribution.
    pub quotas: Option<BTreeMap<QACategory, f64>>,
    /// Questions per sequence. Defaults to 184 when the manifest has baseline
    /// sequences and 76 otherwise.
    pub n_total: Option<usize>,
    pub seed: u64,
    pub max_object_share: f64,
    pub sampling: SamplingPolicy,
    pub include_functional: bool,
    pub judge_failure_policy: JudgeFailurePolicy,
    pub temperatures: TemperatureSection,
}

impl Default for VqaSection {
    fn default() -> Self {
        Self {
            quotas: None,
            n_total: None,
            seed: 0,
            max_object_share: 0.3,
            sampling: SamplingPolicy::default(),
            include_functional: false,
            judge_failure_policy: JudgeFailurePolicy::CountIncorrect,
            temperatures: TemperatureSection::default(),
        }
    }
}

impl VqaSection {
    pub fn quota(&self) -> Result<CategoryQuota> {
        Ok(match &self.quotas {
            None => CategoryQuota::default(),
            Some(m) => CategoryQuota::from_pairs(m.iter().map(|(c, r)| (*c, *r)))?,
        })
    }

    pub fn temperatures(&self) -> Temperatures {
        let t = &self.temperatures;
        Temperatures {
            describe: t.describe,
            generate: t.generate,
            validate: t.validate,
            answer: t.answer,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text)?;
        cfg.resolve(base_dir);
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Directory relative patterns are resolved against.
    pub fn base_dir(&self) -> &Path {
        &self.base_dir_cache
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.manifest);
        join(&mut self.output_dir);
        if let Some(p) = &mut self.gateway.replay_dir {
            join(p);
        }
        if let Some(p) = &mut self.seg_eval.embedding_table {
            join(p);
        }
        self.base_dir_cache = base.to_path_buf();
    }

    fn check(&self) -> Result<()> {
        let mut names = std::collections::HashSet::new();
        for m in &self.methods {
            if m.name.trim().is_empty() {
                bail!("method name must not be empty");
            }
            if !names.insert(m.name.as_str()) {
                bail!("method `{}` is listed twice", m.name);
            }
        }
        let s = &self.seg_eval;
        if !(s.radius.is_finite() && s.radius > 0.0) {
            bail!("seg_eval.radius must be positive, got {}", s.radius);
        }
        if s.matcher == MatchMode::Embedding && s.embedding_table.is_none() {
            bail!("seg_eval.matcher = \"embedding\" needs seg_eval.embedding_table");
        }
        let v = &self.vqa;
        if !(v.max_object_share > 0.0 && v.max_object_share <= 1.0) {
            bail!("vqa.max_object_share must be in (0, 1], got {}", v.max_object_share);
        }
        v.quota()?;
        let g = &self.gateway;
        if g.max_in_flight == 0 || g.max_attempts == 0 {
            bail!("gateway.max_in_flight and gateway.max_attempts must be at least 1");
        }
        Ok(())
    }
}

/// Expands `{method}`, `{scene}` and `{condition}` and resolves the result
/// against `base`.
pub fn expand(pattern: &str, base: &Path, method: &str, scene: &str, condition: ConditionKind) -> PathBuf {
    let p = pattern
        .replace("{method}", method)
        .replace("{scene}", scene)
        .replace("{condition}", condition.as_str());
    base.join(p)
}
