use anyhow::Result;
use mapeval_core::ingest::{validate_manifest, ValidationOptions};

use crate::app::Ctx;
use crate::config::expand;

/// Prints every issue; returns 1 when any of them is fatal.
pub fn run(ctx: &Ctx) -> Result<i32> {
    let opts = ValidationOptions {
        label_field: ctx.config.seg_eval.label_field.clone(),
        ..ValidationOptions::default()
    };
    let mut fatal = 0;
    let mut warnings = 0;
    for (at, issue) in validate_manifest(&ctx.manifest, &opts) {
        if issue.is_fatal() {
            fatal += 1;
        } else {
            warnings += 1;
        }
        let at = if at.is_empty() { "dataset".to_string() } else { at };
        println!("{at}: {issue}");
    }

    // Method path patterns must point at something for at least one sequence.
    let base = ctx.config.base_dir();
    for m in &ctx.config.methods {
        for (what, pattern) in [("pred_cloud", &m.pred_cloud), ("scene_graph", &m.scene_graph), ("answers", &m.answers)] {
            let Some(pattern) = pattern else { continue };
            let mut found = 0;
            for (scene, seq) in ctx.manifest.sequences() {
                let path = expand(pattern, base, &m.name, &scene.scene_id, seq.condition);
                if path.is_file() {
                    found += 1;
                } else {
                    warnings += 1;
                    println!(
                        "{}/{}: warning [{}] {what} {} does not exist",
                        scene.scene_id,
                        seq.condition,
                        m.name,
                        path.display()
                    );
                }
            }
            if found == 0 && ctx.manifest.sequences().next().is_some() {
                fatal += 1;
                println!("method {}: error {what} pattern `{pattern}` matches no sequence", m.name);
            }
        }
        if let Some(labels) = &m.pred_labels {
            let path = base.join(labels.replace("{method}", &m.name));
            if !path.is_file() {
                fatal += 1;
                println!("method {}: error pred_labels {} does not exist", m.name, path.display());
            }
        }
    }

    println!("{fatal} error(s), {warnings} warning(s)");
    Ok(i32::from(fatal > 0))
}
