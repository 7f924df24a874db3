use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mapeval_core::scenario::{emit_condition_config, to_habitat_layout, ScenarioDefaults};
use mapeval_core::ConditionKind;

use crate::config::RunConfig;

/// Writes `<condition>.json` (and `<condition>.habitat.json` when asked) for
/// one or all conditions. Returns the written paths.
pub fn run(config: Option<&RunConfig>, out: Option<&Path>, only: Option<ConditionKind>, habitat: bool) -> Result<Vec<PathBuf>> {
    let defaults = config.map(|c| c.scenario.clone()).unwrap_or_default();
    let out = match (out, config) {
        (Some(dir), _) => dir.to_path_buf(),
        (None, Some(c)) => c.output_dir.join("scenarios"),
        (None, None) => PathBuf::from("scenarios"),
    };
    emit_all(&defaults, &out, only, habitat)
}

pub fn emit_all(defaults: &ScenarioDefaults, out: &Path, only: Option<ConditionKind>, habitat: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut written = Vec::new();
    for kind in ConditionKind::ALL.into_iter().filter(|k| only.is_none_or(|o| o == *k)) {
        let cfg = emit_condition_config(kind, defaults);
        for warning in cfg.warnings() {
            log::warn!("{kind}: {warning}");
        }
        let path = out.join(format!("{kind}.json"));
        std::fs::write(&path, cfg.to_json()).with_context(|| format!("cannot write {}", path.display()))?;
        written.push(path);
        if habitat {
            let path = out.join(format!("{kind}.habitat.json"));
            let mut text = serde_json::to_string_pretty(&to_habitat_layout(&cfg.light_setup))?;
            text.push('\n');
            std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
            written.push(path);
        }
    }
    Ok(written)
}
