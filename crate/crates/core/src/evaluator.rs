//! Dataset-level metrics: Locate / Lingualize / Leverage / Overall and the
//! action metrics Type / GR / SR.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::raw_normalized_distance;
use crate::model::{Action, Sample};
use crate::parser::ParsedResponse;
use crate::reward::{leverage_reward, lingualization_reward, location_reward, match_elements, RewardConfig, RewardError};
use crate::scalar::Real;
use crate::similarity::Similarity;
use crate::text::text_eq;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("nothing to evaluate")]
    Empty,
    #[error("sample {sample_id}: {source}")]
    Reward {
        sample_id: String,
        #[source]
        source: RewardError,
    },
    #[error("malformed report: {0}")]
    Decode(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real"))]
pub struct EvalConfig<T> {
    pub reward: RewardConfig<T>,
    /// Grounding tolerance as a fraction of the screen diagonal, used when the
    /// ground truth has no target box.
    pub gr_radius: T,
}

impl<T: Real> Default for EvalConfig<T> {
    fn default() -> Self {
        Self {
            reward: RewardConfig::default(),
            gr_radius: T::lit(0.14),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComprehensionMetrics<T> {
    pub n_samples: usize,
    pub locate: T,
    pub lingualize: T,
    pub leverage: T,
    /// Product of the three dataset means.
    pub overall: T,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionTypeStats {
    pub count: usize,
    pub type_correct: usize,
    pub grounding_applicable: usize,
    pub grounded: usize,
    pub success: usize,
}

impl ActionTypeStats {
    fn rate(num: usize, den: usize) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn type_acc(&self) -> f64 {
        Self::rate(self.type_correct, self.count)
    }

    pub fn gr(&self) -> f64 {
        Self::rate(self.grounded, self.grounding_applicable)
    }

    pub fn sr(&self) -> f64 {
        Self::rate(self.success, self.count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionMetrics<T> {
    pub n_samples: usize,
    pub type_acc: T,
    /// Over ground-truth click / long_press actions only; 0 when there are none.
    pub gr: T,
    pub gr_applicable: usize,
    pub sr: T,
    pub per_action_type: BTreeMap<String, ActionTypeStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<T> {
    pub label: Option<String>,
    pub n_samples: usize,
    pub locate: T,
    pub lingualize: T,
    pub leverage: T,
    pub overall: T,
    pub type_acc: T,
    pub gr: T,
    pub gr_applicable: usize,
    pub sr: T,
    pub per_action_type: BTreeMap<String, ActionTypeStats>,
}

impl<T: Real> EvalReport<T> {
    pub fn from_parts(label: Option<String>, c: ComprehensionMetrics<T>, a: ActionMetrics<T>) -> Self {
        Self {
            label,
            n_samples: c.n_samples,
            locate: c.locate,
            lingualize: c.lingualize,
            leverage: c.leverage,
            overall: c.overall,
            type_acc: a.type_acc,
            gr: a.gr,
            gr_applicable: a.gr_applicable,
            sr: a.sr,
            per_action_type: a.per_action_type,
        }
    }
}

/// Per-sample Locate/Lingualize/Leverage, reusing the reward computations.
/// Responses that fail the format check score 0 on all three.
pub fn comprehension_scores<T: Real>(
    sample: &Sample,
    response: &ParsedResponse,
    config: &EvalConfig<T>,
    sim: &dyn Similarity<T>,
) -> Result<(T, T, T), RewardError> {
    let gts = &sample.gt_elements;
    if gts.is_empty() {
        return Err(RewardError::NoGroundTruth);
    }
    if !response.format_ok {
        return Ok((T::zero(), T::zero(), T::zero()));
    }
    let assignment = match_elements(&response.elements, gts);
    let loc = location_reward(&response.elements, gts, &sample.screen, &assignment)?;
    let lin = lingualization_reward(&response.elements, gts, &assignment, sim)?;
    let lev = response
        .first_action()
        .map(|a| leverage_reward(a, &sample.gt_action, &sample.screen, &config.reward))
        .unwrap_or_else(T::zero);
    Ok((loc, lin, lev))
}

pub fn eval_comprehension<T: Real>(
    pairs: &[(Sample, ParsedResponse)],
    config: &EvalConfig<T>,
    sim: &dyn Similarity<T>,
) -> Result<ComprehensionMetrics<T>, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    // Collected in input order, then reduced sequentially: the result does not
    // depend on how rayon schedules the per-sample work.
    let scores = pairs
        .par_iter()
        .map(|(s, r)| {
            comprehension_scores(s, r, config, sim).map_err(|source| EvalError::Reward {
                sample_id: s.sample_id.clone(),
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = T::from_count(scores.len());
    let (sl, sn, sv) = scores
        .iter()
        .fold((T::zero(), T::zero(), T::zero()), |(a, b, c), &(l, m, v)| (a + l, b + m, c + v));
    let (locate, lingualize, leverage) = (sl / n, sn / n, sv / n);
    Ok(ComprehensionMetrics {
        n_samples: scores.len(),
        locate,
        lingualize,
        leverage,
        overall: locate * lingualize * leverage,
    })
}

/// Whether `pred` lands on the ground-truth target: inside the target box when
/// the sample has one, otherwise within `gr_radius` of the diagonal.
pub fn grounded<T: Real>(pred: &Action, sample: &Sample, gr_radius: T) -> bool {
    let p = pred.point;
    if p.is_sentinel() || p.is_malformed() {
        return false;
    }
    match &sample.gt_bbox {
        Some(b) => b.contains(p),
        None => {
            let gt = sample.gt_action.point;
            !gt.is_sentinel() && raw_normalized_distance::<T>(p, gt, &sample.screen) <= gr_radius
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ActionOutcome {
    type_ok: bool,
    positional: bool,
    grounded: bool,
    success: bool,
}

fn action_outcome<T: Real>(sample: &Sample, response: &ParsedResponse, gr_radius: T) -> ActionOutcome {
    let gt = &sample.gt_action;
    let positional = gt.action_type.is_positional();
    let Some(pred) = response.first_action() else {
        return ActionOutcome {
            positional,
            ..Default::default()
        };
    };
    let type_ok = pred.action_type == gt.action_type;
    let grounded = positional && grounded(pred, sample, gr_radius);
    let success = type_ok
        && if positional {
            grounded
        } else if gt.action_type.is_textual() {
            text_eq(&pred.input_text, &gt.input_text)
        } else {
            true
        };
    ActionOutcome {
        type_ok,
        positional,
        grounded,
        success,
    }
}

pub fn eval_actions<T: Real>(
    pairs: &[(Sample, ParsedResponse)],
    config: &EvalConfig<T>,
) -> Result<ActionMetrics<T>, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let outcomes: Vec<ActionOutcome> = pairs
        .par_iter()
        .map(|(s, r)| action_outcome(s, r, config.gr_radius))
        .collect();
    let mut per_type: BTreeMap<String, ActionTypeStats> = BTreeMap::new();
    let mut total = ActionTypeStats::default();
    for ((s, _), o) in pairs.iter().zip(&outcomes) {
        let entry = per_type.entry(s.gt_action.action_type.as_str().to_owned()).or_default();
        for st in [&mut total, entry] {
            st.count += 1;
            st.type_correct += usize::from(o.type_ok);
            st.grounding_applicable += usize::from(o.positional);
            st.grounded += usize::from(o.grounded);
            st.success += usize::from(o.success);
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            T::zero()
        } else {
            T::from_count(num) / T::from_count(den)
        }
    };
    Ok(ActionMetrics {
        n_samples: total.count,
        type_acc: ratio(total.type_correct, total.count),
        gr: ratio(total.grounded, total.grounding_applicable),
        gr_applicable: total.grounding_applicable,
        sr: ratio(total.success, total.count),
        per_action_type: per_type,
    })
}

/// Both metric families in one report.
pub fn evaluate<T: Real>(
    pairs: &[(Sample, ParsedResponse)],
    config: &EvalConfig<T>,
    sim: &dyn Similarity<T>,
    label: Option<String>,
) -> Result<EvalReport<T>, EvalError> {
    let c = eval_comprehension(pairs, config, sim)?;
    let a = eval_actions(pairs, config)?;
    Ok(EvalReport::from_parts(label, c, a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(format!("unknown report format '{other}' (expected json or markdown)")),
        }
    }
}

/// Frozen JSON schema of an evaluation report. Rates are percentages in
/// `[0, 100]` at full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub schema_version: u32,
    pub label: Option<String>,
    pub n_samples: usize,
    pub locate: f64,
    pub lingualize: f64,
    pub leverage: f64,
    pub overall: f64,
    pub type_acc: f64,
    pub gr: f64,
    pub gr_applicable: usize,
    pub sr: f64,
    pub per_action_type: BTreeMap<String, ActionTypeJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionTypeJson {
    pub count: usize,
    pub type_correct: usize,
    pub grounding_applicable: usize,
    pub grounded: usize,
    pub success: usize,
    pub type_acc: f64,
    /// `null` when no sample of this type has a positional target.
    pub gr: Option<f64>,
    pub sr: f64,
}

impl<T: Real> From<&EvalReport<T>> for ReportJson {
    fn from(r: &EvalReport<T>) -> Self {
        let pct = |v: T| v.to_f64_lossy() * 100.0;
        ReportJson {
            schema_version: REPORT_SCHEMA_VERSION,
            label: r.label.clone(),
            n_samples: r.n_samples,
            locate: pct(r.locate),
            lingualize: pct(r.lingualize),
            leverage: pct(r.leverage),
            overall: pct(r.overall),
            type_acc: pct(r.type_acc),
            gr: pct(r.gr),
            gr_applicable: r.gr_applicable,
            sr: pct(r.sr),
            per_action_type: r
                .per_action_type
                .iter()
                .map(|(k, s)| {
                    (
                        k.clone(),
                        ActionTypeJson {
                            count: s.count,
                            type_correct: s.type_correct,
                            grounding_applicable: s.grounding_applicable,
                            grounded: s.grounded,
                            success: s.success,
                            type_acc: s.type_acc() * 100.0,
                            gr: (s.grounding_applicable > 0).then(|| s.gr() * 100.0),
                            sr: s.sr() * 100.0,
                        },
                    )
                })
                .collect(),
        }
    }
}

impl ReportJson {
    pub fn decode(text: &str) -> Result<Self, EvalError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Percentage rounded half-up to one decimal, e.g. `0.26109` → `"26.1"`.
pub fn format_percent(fraction: f64) -> String {
    // Decimal ties such as 0.2615 are stored slightly below the tie in binary;
    // the epsilon keeps them rounding up.
    let tenths = (fraction * 1000.0 + 0.5 + 1e-9).floor();
    format!("{:.1}", tenths / 10.0)
}

pub fn emit_report<T: Real>(r: &EvalReport<T>, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(&ReportJson::from(r)).expect("report serializes"),
        ReportFormat::Markdown => markdown(r),
    }
}

fn markdown<T: Real>(r: &EvalReport<T>) -> String {
    let label = r.label.as_deref().unwrap_or("model");
    let p = |v: T| format_percent(v.to_f64_lossy());
    let mut out = String::new();
    let _ = writeln!(out, "UI Comprehension ({} samples)\n", r.n_samples);
    out.push_str("| Method | Loc. | Lin. | Lev. | Overall |\n");
    out.push_str("|:--|--:|--:|--:|--:|\n");
    let _ = writeln!(
        out,
        "| {label} | {} | {} | {} | {} |",
        p(r.locate),
        p(r.lingualize),
        p(r.leverage),
        p(r.overall)
    );
    out.push_str("\nAction metrics\n\n");
    out.push_str("| Method | Type | GR | SR |\n");
    out.push_str("|:--|--:|--:|--:|\n");
    let _ = writeln!(out, "| {label} | {} | {} | {} |", p(r.type_acc), p(r.gr), p(r.sr));
    if !r.per_action_type.is_empty() {
        out.push_str("\n| Action | Count | Type | GR | SR |\n");
        out.push_str("|:--|--:|--:|--:|--:|\n");
        for (k, s) in &r.per_action_type {
            let gr = if s.grounding_applicable == 0 {
                "-".to_owned()
            } else {
                format_percent(s.gr())
            };
            let _ = writeln!(
                out,
                "| {k} | {} | {} | {gr} | {} |",
                s.count,
                format_percent(s.type_acc()),
                format_percent(s.sr())
            );
        }
    }
    out
}
