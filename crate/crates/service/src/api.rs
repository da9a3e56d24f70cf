//! Request and response bodies of the `/v1` API.

use serde::{Deserialize, Serialize};
use uiloop_core::dataset::BenchRecord;
use uiloop_core::grpo::standardize;
use uiloop_core::model::{validate_sample, Sample, Violation};
use uiloop_core::parser::parse_response;
use uiloop_core::reward::{score_response, RewardError};
use uiloop_core::{ClickMatch, GrpoError, RewardConfig, ScoredResponse, Similarity};

use crate::config::GroupSettings;

pub const API_VERSION: u32 = 1;

/// Per-request changes to the reward weights. Unset fields keep the service value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardOverrides {
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub eta: Option<f64>,
    pub click_match: Option<ClickMatch<f64>>,
    pub zero_total_on_format_failure: Option<bool>,
}

impl RewardOverrides {
    pub fn apply(&self, base: &RewardConfig) -> RewardConfig {
        let mut c = base.clone();
        if let Some(v) = self.alpha1 {
            c.alpha1 = v;
        }
        if let Some(v) = self.alpha2 {
            c.alpha2 = v;
        }
        if let Some(v) = self.eta {
            c.eta = v;
        }
        if let Some(v) = &self.click_match {
            c.click_match = *v;
        }
        if let Some(v) = self.zero_total_on_format_failure {
            c.zero_total_on_format_failure = v;
        }
        c
    }
}

/// Body of `/score` and `/score_group`. `sample` is either a benchmark record
/// (recognized by its `key_ui_elements` field) or a bare sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    pub sample: serde_json::Value,
    pub responses: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RewardOverrides>,
}

#[derive(Debug)]
pub enum SampleError {
    Schema(String),
    Invariant(Vec<Violation>),
}

pub fn decode_sample(v: serde_json::Value) -> Result<Sample, SampleError> {
    let is_record = v.get("key_ui_elements").is_some();
    let (sample, violations) = if is_record {
        let r: BenchRecord = serde_json::from_value(v).map_err(|e| SampleError::Schema(e.to_string()))?;
        (r.to_sample(), r.violations())
    } else {
        let s: Sample = serde_json::from_value(v).map_err(|e| SampleError::Schema(e.to_string()))?;
        let v = validate_sample(&s);
        (s, v)
    };
    if violations.is_empty() {
        Ok(sample)
    } else {
        Err(SampleError::Invariant(violations))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub schema_version: u32,
    #[serde(flatten)]
    pub scored: ScoredResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreGroupResponse {
    pub schema_version: u32,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    pub breakdowns: Vec<ScoredResponse>,
}

#[derive(Debug, thiserror::Error)]
pub enum GroupError {
    #[error("expected {expected} responses, got {got}")]
    Size { expected: usize, got: usize },
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Grpo(#[from] GrpoError),
}

/// Scores every response of one rollout group and normalizes the totals.
pub fn score_group(
    sample: &Sample,
    responses: &[String],
    config: &RewardConfig,
    group: &GroupSettings,
    sim: &dyn Similarity<f64>,
) -> Result<ScoreGroupResponse, GroupError> {
    if responses.len() != group.group_size {
        return Err(GroupError::Size {
            expected: group.group_size,
            got: responses.len(),
        });
    }
    let breakdowns = responses
        .iter()
        .map(|r| score_response(&parse_response(r), sample, config, sim))
        .collect::<Result<Vec<_>, _>>()?;
    let rewards: Vec<f64> = breakdowns.iter().map(|b| b.breakdown.total).collect();
    let advantages = standardize(&rewards, group.std_floor)?;
    Ok(ScoreGroupResponse {
        schema_version: API_VERSION,
        rewards,
        advantages,
        breakdowns,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireFormat {
    #[default]
    Json,
    Markdown,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateRequest {
    /// Benchmark JSONL, relative to the service data root.
    pub dataset: String,
    /// Responses JSONL (`{sample_id, response}` per line), relative to the data root.
    pub responses: String,
    #[serde(default)]
    pub format: WireFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub similarity_backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}
