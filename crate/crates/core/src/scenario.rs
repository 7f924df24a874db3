//! Simulator-neutral condition documents for the five test conditions.
//!
//! The emitted JSON is our own schema. [`to_habitat_layout`] maps the light
//! setup onto a Habitat-Sim style lighting layout.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::condition::ConditionKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightKind {
    Point,
    Directional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attachment {
    World,
    Camera,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Light {
    pub kind: LightKind,
    pub attached_to: Attachment,
    pub intensity: f64,
    /// Position for point lights, direction for directional ones.
    pub position_or_direction: [f64; 3],
    /// Set on lights the user still has to fill in.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub placeholder: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    /// Path waypoint index from which this setup applies.
    pub waypoint: usize,
    pub light_setup: Vec<Light>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionConfig {
    pub condition: ConditionKind,
    pub light_setup: Vec<Light>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light_schedule: Option<Vec<ScheduleEntry>>,
    /// m/s
    pub linear_velocity: f64,
    /// rad/s
    pub angular_velocity: f64,
}

/// Knobs for [`emit_condition_config`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioDefaults {
    pub nominal_linear_velocity: f64,
    pub nominal_angular_velocity: f64,
    pub velocity_factor: f64,
    pub camera_light_intensity: f64,
    /// Scene lights of the Baseline condition. Not published for the
    /// reference scenes, so empty means "emit a placeholder".
    pub baseline_lights: Vec<Light>,
    /// Intensity of the roaming light at successive schedule entries.
    pub dynamic_intensities: Vec<f64>,
    /// Waypoints between schedule entries.
    pub dynamic_period: usize,
    pub dynamic_light_position: [f64; 3],
}

impl Default for ScenarioDefaults {
    fn default() -> Self {
        Self {
            nominal_linear_velocity: 0.75,
            nominal_angular_velocity: 0.8,
            velocity_factor: 2.0,
            camera_light_intensity: 1.0,
            baseline_lights: Vec::new(),
            dynamic_intensities: vec![1.0, 0.3, 0.8, 0.15],
            dynamic_period: 10,
            dynamic_light_position: [0.0, 2.5, 0.0],
        }
    }
}

fn placeholder_light() -> Light {
    Light {
        kind: LightKind::Point,
        attached_to: Attachment::World,
        intensity: 0.0,
        position_or_direction: [0.0, 0.0, 0.0],
        placeholder: true,
    }
}

/// Build the condition document for `kind`. Pure and total.
pub fn emit_condition_config(kind: ConditionKind, base: &ScenarioDefaults) -> ConditionConfig {
    let mut cfg = ConditionConfig {
        condition: kind,
        light_setup: Vec::new(),
        light_schedule: None,
        linear_velocity: base.nominal_linear_velocity,
        angular_velocity: base.nominal_angular_velocity,
    };
    match kind {
        ConditionKind::Baseline => {
            cfg.light_setup = if base.baseline_lights.is_empty() {
                vec![placeholder_light()]
            } else {
                base.baseline_lights.clone()
            };
        }
        ConditionKind::NominalLights => {}
        ConditionKind::CameraLight => {
            cfg.light_setup = vec![Light {
                kind: LightKind::Directional,
                attached_to: Attachment::Camera,
                intensity: base.camera_light_intensity,
                // Habitat cameras look down -Z.
                position_or_direction: [0.0, 0.0, -1.0],
                placeholder: false,
            }];
        }
        ConditionKind::DynamicLights => {
            let mut intensities = base.dynamic_intensities.clone();
            while intensities.len() < 2 {
                intensities.push(intensities.last().copied().unwrap_or(1.0) * 0.5);
            }
            let schedule: Vec<ScheduleEntry> = intensities
                .iter()
                .enumerate()
                .map(|(i, &intensity)| ScheduleEntry {
                    waypoint: i * base.dynamic_period.max(1),
                    light_setup: vec![Light {
                        kind: LightKind::Point,
                        attached_to: Attachment::World,
                        intensity,
                        position_or_direction: base.dynamic_light_position,
                        placeholder: false,
                    }],
                })
                .collect();
            cfg.light_setup = schedule[0].light_setup.clone();
            cfg.light_schedule = Some(schedule);
        }
        ConditionKind::Velocity => {
            cfg.linear_velocity = base.nominal_linear_velocity * base.velocity_factor;
            cfg.angular_velocity = base.nominal_angular_velocity * base.velocity_factor;
        }
    }
    cfg
}

impl ConditionConfig {
    /// Structural invariants of a condition document.
    pub fn check(&self) -> std::result::Result<(), String> {
        match self.condition {
            ConditionKind::NominalLights if !self.light_setup.is_empty() => {
                return Err("nominal_lights must not add light sources".into())
            }
            ConditionKind::DynamicLights => match &self.light_schedule {
                Some(s) if !s.is_empty() => {
                    if s.windows(2).any(|w| w[0].waypoint >= w[1].waypoint) {
                        return Err("light_schedule waypoints must be strictly increasing".into());
                    }
                }
                _ => return Err("dynamic_lights requires a non-empty light_schedule".into()),
            },
            ConditionKind::CameraLight
                if !self.light_setup.iter().any(|l| l.attached_to == Attachment::Camera) =>
            {
                return Err("camera_light requires a light attached to the camera".into())
            }
            _ => {}
        }
        if !(self.linear_velocity > 0.0 && self.angular_velocity > 0.0) {
            return Err("velocities must be positive".into());
        }
        Ok(())
    }

    /// Non-fatal findings, e.g. unfilled placeholder lights.
    pub fn warnings(&self) -> Vec<String> {
        let count = self
            .light_setup
            .iter()
            .chain(self.light_schedule.iter().flatten().flat_map(|e| &e.light_setup))
            .filter(|l| l.placeholder)
            .count();
        if count > 0 {
            vec![format!("{count} placeholder light(s) must be filled in before simulation")]
        } else {
            vec![]
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("condition config serializes");
        s.push('\n');
        s
    }
}

pub fn parse_condition_config(text: &str, origin: &Path) -> Result<ConditionConfig> {
    let cfg: ConditionConfig = serde_json::from_str(text).map_err(|e| {
        if e.is_data() {
            Error::schema(origin, e.to_string())
        } else {
            Error::Parse {
                path: origin.to_path_buf(),
                line: Some(e.line()),
                message: e.to_string(),
            }
        }
    })?;
    cfg.check().map_err(|m| Error::schema(origin, m))?;
    Ok(cfg)
}

pub fn load_condition_config(path: impl AsRef<Path>) -> Result<ConditionConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_condition_config(&text, path)
}

/// Habitat-style lighting layout for a light setup: `lights` keyed by index,
/// `position_model` "global" or "camera".
pub fn to_habitat_layout(lights: &[Light]) -> serde_json::Value {
    let entries: serde_json::Map<String, serde_json::Value> = lights
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let ty = match l.kind {
                LightKind::Point => "point",
                LightKind::Directional => "directional",
            };
            let model = match l.attached_to {
                Attachment::World => "global",
                Attachment::Camera => "camera",
            };
            let key = match l.kind {
                LightKind::Point => "position",
                LightKind::Directional => "direction",
            };
            (
                i.to_string(),
                json!({
                    key: l.position_or_direction,
                    "intensity": l.intensity,
                    "color": [1.0, 1.0, 1.0],
                    "type": ty,
                    "position_model": model,
                }),
            )
        })
        .collect();
    json!({ "lights": entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emit(kind: ConditionKind) -> ConditionConfig {
        emit_condition_config(kind, &ScenarioDefaults::default())
    }

    #[test]
    fn nominal_lights() {
        let c = emit(ConditionKind::NominalLights);
        assert!(c.light_setup.is_empty());
        assert_eq!((c.linear_velocity, c.angular_velocity), (0.75, 0.8));
    }

    #[test]
    fn velocity_doubles_nominal() {
        let c = emit(ConditionKind::Velocity);
        assert_eq!((c.linear_velocity, c.angular_velocity), (1.5, 1.6));
    }

    #[test]
    fn camera_light() {
        let c = emit(ConditionKind::CameraLight);
        assert_eq!(c.light_setup.len(), 1);
        assert_eq!(c.light_setup[0].attached_to, Attachment::Camera);
        assert_eq!(c.light_setup[0].kind, LightKind::Directional);
        assert_eq!(c.linear_velocity, 0.75);
    }

    #[test]
    fn dynamic_schedule_has_at_least_two_entries() {
        let c = emit(ConditionKind::DynamicLights);
        assert!(c.light_schedule.as_ref().unwrap().len() >= 2);
        let base = ScenarioDefaults {
            dynamic_intensities: vec![],
            ..Default::default()
        };
        let c = emit_condition_config(ConditionKind::DynamicLights, &base);
        assert_eq!(c.light_schedule.unwrap().len(), 2);
    }

    #[test]
    fn baseline_placeholder_warns() {
        let c = emit(ConditionKind::Baseline);
        assert_eq!(c.warnings().len(), 1);
        let base = ScenarioDefaults {
            baseline_lights: vec![Light {
                kind: LightKind::Point,
                attached_to: Attachment::World,
                intensity: 3.0,
                position_or_direction: [1.0, 2.0, 0.0],
                placeholder: false,
            }],
            ..Default::default()
        };
        assert!(emit_condition_config(ConditionKind::Baseline, &base).warnings().is_empty());
    }

    #[test]
    fn every_condition_round_trips_and_checks() {
        for kind in ConditionKind::ALL {
            let c = emit(kind);
            c.check().unwrap();
            let back = parse_condition_config(&c.to_json(), Path::new("c.json")).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn invariant_violations_rejected() {
        let mut c = emit(ConditionKind::NominalLights);
        c.light_setup = emit(ConditionKind::CameraLight).light_setup;
        assert!(parse_condition_config(&c.to_json(), Path::new("c")).is_err());
        let mut d = emit(ConditionKind::DynamicLights);
        d.light_schedule = Some(vec![]);
        assert!(d.check().is_err());
    }

    #[test]
    fn habitat_mapping() {
        let layout = to_habitat_layout(&emit(ConditionKind::CameraLight).light_setup);
        assert_eq!(layout["lights"]["0"]["position_model"], "camera");
        assert_eq!(layout["lights"]["0"]["type"], "directional");
    }
}
