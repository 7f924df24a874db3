use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The five sequence variants a scene can be recorded under.
///
/// Declaration order is the column order used by every rendered table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    /// Static, non-uniformly distributed scene lights (ReplicaCAD default).
    Baseline,
    /// One extra directed light attached to the camera.
    CameraLight,
    /// Lighting that changes along the robot path.
    DynamicLights,
    /// Mesh self-emission only, no added light sources.
    NominalLights,
    /// Nominal lighting with doubled reference velocities.
    Velocity,
}

impl ConditionKind {
    pub const ALL: [ConditionKind; 5] = [
        ConditionKind::Baseline,
        ConditionKind::CameraLight,
        ConditionKind::DynamicLights,
        ConditionKind::NominalLights,
        ConditionKind::Velocity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConditionKind::Baseline => "baseline",
            ConditionKind::CameraLight => "camera_light",
            ConditionKind::DynamicLights => "dynamic_lights",
            ConditionKind::NominalLights => "nominal_lights",
            ConditionKind::Velocity => "velocity",
        }
    }

    /// Human-readable column title.
    pub fn title(self) -> &'static str {
        match self {
            ConditionKind::Baseline => "Baseline",
            ConditionKind::CameraLight => "Camera Light",
            ConditionKind::DynamicLights => "Dynamic Lights",
            ConditionKind::NominalLights => "Nominal Lights",
            ConditionKind::Velocity => "Velocity",
        }
    }
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConditionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConditionKind::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown condition `{s}`"))
    }
}
