//! Core data model and metrics for benchmarking open semantic mapping outputs.
//!
//! The crate covers dataset ingestion (manifests, labeled PLY clouds, scene
//! graphs), open-vocabulary label matching, point association with the 3D
//! segmentation metrics built on top of it, and simulator condition documents.

pub mod condition;
pub mod error;
pub mod ingest;
pub mod labels;
pub mod scenario;
pub mod seg;

pub use condition::ConditionKind;
pub use error::{Error, Result};
