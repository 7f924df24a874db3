use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::condition::ConditionKind;
use crate::error::{Error, Result};

/// A dataset bundle: scenes, their sequences, and the GT class vocabulary.
///
/// All paths are resolved against the manifest's directory at load time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub dataset_name: String,
    pub class_vocabulary_path: PathBuf,
    pub scenes: Vec<SceneEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneEntry {
    pub scene_id: String,
    pub sequences: Vec<SequenceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub condition: ConditionKind,
    pub gt_cloud: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_cloud: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_graph: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyframes_dir: Option<PathBuf>,
    /// Throughput of the method that produced `pred_cloud`, in Hz. Metadata only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method_fps: Option<f64>,
    /// Simulator condition document this sequence was rendered from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_config: Option<PathBuf>,
}

impl DatasetManifest {
    pub fn scene(&self, scene_id: &str) -> Option<&SceneEntry> {
        self.scenes.iter().find(|s| s.scene_id == scene_id)
    }

    /// Every (scene, sequence) pair in manifest order.
    pub fn sequences(&self) -> impl Iterator<Item = (&SceneEntry, &SequenceSpec)> {
        self.scenes
            .iter()
            .flat_map(|scene| scene.sequences.iter().map(move |seq| (scene, seq)))
    }

    /// True when any sequence was recorded under the Baseline condition.
    pub fn has_baseline(&self) -> bool {
        self.sequences()
            .any(|(_, seq)| seq.condition == ConditionKind::Baseline)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.class_vocabulary_path);
        for scene in &mut self.scenes {
            for seq in &mut scene.sequences {
                join(&mut seq.gt_cloud);
                for p in [
                    &mut seq.pred_cloud,
                    &mut seq.scene_graph,
                    &mut seq.keyframes_dir,
                    &mut seq.scenario_config,
                ]
                .into_iter()
                .flatten()
                {
                    join(p);
                }
            }
        }
    }

    fn check_structure(&self, path: &Path) -> Result<()> {
        let mut seen = HashSet::new();
        for scene in &self.scenes {
            if scene.scene_id.trim().is_empty() {
                return Err(Error::schema(path, "scene_id must not be empty"));
            }
            if !seen.insert(scene.scene_id.as_str()) {
                return Err(Error::schema(
                    path,
                    format!("duplicate scene_id `{}`", scene.scene_id),
                ));
            }
            if scene.sequences.is_empty() {
                return Err(Error::schema(
                    path,
                    format!("scene `{}` has no sequences", scene.scene_id),
                ));
            }
            let mut conditions = HashSet::new();
            for seq in &scene.sequences {
                if !conditions.insert(seq.condition) {
                    return Err(Error::schema(
                        path,
                        format!(
                            "scene `{}` lists condition `{}` more than once",
                            scene.scene_id, seq.condition
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Parse a manifest document. Relative paths are resolved against `base_dir`.
pub fn parse_manifest(text: &str, origin: &Path, base_dir: &Path) -> Result<DatasetManifest> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: e.span().map(|span| line_of(text, span.start)),
        message: e.message().to_string(),
    })?;
    let mut manifest: DatasetManifest = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::schema(origin, e.message().to_string()))?;
    manifest.check_structure(origin)?;
    manifest.resolve_paths(base_dir);
    Ok(manifest)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(&text, path, base)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
dataset_name = "mini"
class_vocabulary_path = "classes.txt"

[[scenes]]
scene_id = "apt_0"

[[scenes.sequences]]
condition = "baseline"
gt_cloud = "apt_0/gt.ply"
"#;

    fn parse(text: &str) -> Result<DatasetManifest> {
        parse_manifest(text, Path::new("manifest.toml"), Path::new("/data"))
    }

    #[test]
    fn minimal_manifest() {
        let m = parse(MINIMAL).unwrap();
        assert_eq!(m.scenes.len(), 1);
        assert_eq!(m.scenes[0].sequences[0].condition, ConditionKind::Baseline);
        assert_eq!(m.scenes[0].sequences[0].gt_cloud, Path::new("/data/apt_0/gt.ply"));
        assert_eq!(m.class_vocabulary_path, Path::new("/data/classes.txt"));
        assert!(m.has_baseline());
    }

    #[test]
    fn twenty_two_scenes() {
        let mut text = String::from("dataset_name = \"replicacad\"\nclass_vocabulary_path = \"c.txt\"\n");
        for i in 0..22 {
            text.push_str(&format!(
                "[[scenes]]\nscene_id = \"sc{i:02}\"\n[[scenes.sequences]]\ncondition = \"baseline\"\ngt_cloud = \"sc{i:02}.ply\"\n"
            ));
        }
        assert_eq!(parse(&text).unwrap().scenes.len(), 22);
    }

    #[test]
    fn duplicate_scene_is_schema_error() {
        let text = format!("{MINIMAL}\n[[scenes]]\nscene_id = \"apt_0\"\n[[scenes.sequences]]\ncondition = \"velocity\"\ngt_cloud = \"x.ply\"\n");
        let err = parse(&text).unwrap_err();
        assert!(matches!(err, Error::Schema { .. }), "{err}");
        assert!(err.to_string().contains("duplicate scene_id"));
    }

    #[test]
    fn duplicate_condition_is_schema_error() {
        let text = format!("{MINIMAL}\n[[scenes.sequences]]\ncondition = \"baseline\"\ngt_cloud = \"y.ply\"\n");
        assert!(matches!(parse(&text), Err(Error::Schema { .. })));
    }

    #[test]
    fn missing_field_is_schema_error() {
        let text = MINIMAL.replace("gt_cloud = \"apt_0/gt.ply\"\n", "");
        let err = parse(&text).unwrap_err();
        assert!(matches!(err, Error::Schema { .. }));
        assert!(err.to_string().contains("gt_cloud"), "{err}");
    }

    #[test]
    fn unknown_condition_is_schema_error() {
        let text = MINIMAL.replace("\"baseline\"", "\"sunset\"");
        assert!(matches!(parse(&text), Err(Error::Schema { .. })));
    }

    #[test]
    fn malformed_document_reports_line() {
        let text = "dataset_name = \"x\"\nclass_vocabulary_path = \n";
        match parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, Some(2)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn scene_without_sequences_rejected() {
        let text = "dataset_name = \"x\"\nclass_vocabulary_path = \"c\"\n[[scenes]]\nscene_id = \"a\"\nsequences = []\n";
        assert!(matches!(parse(text), Err(Error::Schema { .. })));
    }
}
