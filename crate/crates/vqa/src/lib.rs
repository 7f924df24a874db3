//! Question generation, validation, answering and judging for scene graphs.
//!
//! The pipeline samples keyframes, asks a vision model to describe them,
//! merges the descriptions, generates questions per category, filters and
//! balances them, and finally answers and judges them against a system's
//! scene graph. Every model call goes through [`mapeval_gateway::Gateway`].

pub mod accuracy;
pub mod aggregate;
pub mod answer;
pub mod balance;
pub mod category;
pub mod describe;
mod error;
pub mod generate;
pub mod item;
pub mod llm;
pub mod sampling;
pub mod store;
pub mod template;
pub mod text;
pub mod validate;

pub use accuracy::{compute_accuracy, AccuracyOptions, AccuracyTable, JudgeFailurePolicy, VerdictSet};
pub use aggregate::{aggregate_descriptions, UnifiedDescription};
pub use answer::{answer_from_scene_graph, AnsweredBy, SystemAnswer};
pub use balance::{balance_questions, BalanceReport};
pub use category::{CategoryQuota, QACategory};
pub use describe::{describe_frame, describe_frames, SceneDescription};
pub use error::{Error, Result};
pub use generate::{generate_questions, GenerationParams, GenerationSummary};
pub use item::{QAItem, QAStatus};
pub use judge::{judge, judge_exact, judge_semantic, JudgeMethod, Verdict};
pub use llm::{Llm, Temperatures};
pub use sampling::{sample_keyframes, FrameSample, SamplingPolicy};
pub use validate::validate_questions;

pub mod judge;
