//! Loading and validating dataset inputs.

mod cloud;
mod manifest;
pub mod ply;
mod scene_graph;
mod validate;

pub use cloud::LabeledPointCloud;
pub use manifest::{load_manifest, parse_manifest, DatasetManifest, SceneEntry, SequenceSpec};
pub use ply::{load_point_cloud, read_ply, write_ply, PlyFormat, PlyLayout, Precision};
pub use scene_graph::{load_scene_graph, parse_scene_graph, SceneEdge, SceneGraph, SceneNode};
pub use validate::{
    list_keyframes, validate_manifest, validate_sequence, Issue, IssueCode, Severity,
    ValidationOptions,
};
