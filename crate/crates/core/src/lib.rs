//! Reward, GRPO and evaluation engine for GUI agents that reason about UI
//! elements before acting.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`). The aliases at the
//! crate root fix the scalar to `f64`; the `*F32` variants exist for callers
//! that want single precision.

pub mod dataset;
pub mod evaluator;
pub mod fixtures;
pub mod geometry;
pub mod grpo;
pub mod model;
pub mod parser;
pub mod reward;
mod scalar;
pub mod similarity;
pub mod synth;
pub mod text;

pub use scalar::Real;

pub use dataset::{BenchRecord, DatasetError, Split, StatsConfig, StatsReport};
pub use evaluator::{EvalError, ReportFormat};
pub use grpo::GrpoError;
pub use model::{Action, ActionType, BBox, Point, PredictedElement, Sample, ScreenMeta, Source, UIElementGT, Violation};
pub use parser::{parse_response, ParsedResponse};
pub use reward::{ClickMatch, RewardError};
pub use similarity::{Similarity, SimilarityBackend, SimilarityError, TokenF1};

pub type RewardConfig = reward::RewardConfig<f64>;
pub type RewardBreakdown = reward::RewardBreakdown<f64>;
pub type ScoredResponse = reward::ScoredResponse<f64>;
pub type GrpoConfig = grpo::GrpoConfig<f64>;
pub type TokenTrace = grpo::TokenTrace<f64>;
pub type EvalConfig = evaluator::EvalConfig<f64>;
pub type EvalReport = evaluator::EvalReport<f64>;

pub type RewardConfigF32 = reward::RewardConfig<f32>;
pub type RewardBreakdownF32 = reward::RewardBreakdown<f32>;
pub type GrpoConfigF32 = grpo::GrpoConfig<f32>;
pub type TokenTraceF32 = grpo::TokenTrace<f32>;
pub type EvalConfigF32 = evaluator::EvalConfig<f32>;
pub type EvalReportF32 = evaluator::EvalReport<f32>;
