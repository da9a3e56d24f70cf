//! Format, Location, Lingualization and Leverage rewards and the gated composite.
//!
//! ```text
//! r = r_format + α1·r_loc·r_lin + α2·[r_loc·r_lin > η]·r_lev
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::raw_normalized_distance;
use crate::model::{Action, ActionType, PredictedElement, Sample, ScreenMeta, UIElementGT};
use crate::parser::{format_reward, ParsedResponse};
use crate::scalar::{indicator, Real};
use crate::similarity::{Similarity, SimilarityBackend, SimilarityError};
use crate::text::text_eq;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("no ground-truth elements")]
    NoGroundTruth,
    #[error("assignment has {got} entries for {expected} ground-truth elements")]
    AssignmentLength { expected: usize, got: usize },
    #[error("invalid reward config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}

/// How a predicted click point is compared to the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ClickMatch<T> {
    /// Identical integer coordinates.
    Exact,
    /// Normalized distance at most `radius_fraction` of the screen diagonal.
    Radius { radius_fraction: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real"))]
pub struct RewardConfig<T> {
    pub alpha1: T,
    pub alpha2: T,
    pub eta: T,
    pub click_match: ClickMatch<T>,
    pub similarity_backend: SimilarityBackend,
    /// Report a total of 0 for responses that fail the grammar. Off by default:
    /// the composite formula only drops the format term.
    pub zero_total_on_format_failure: bool,
}

impl<T: Real> Default for RewardConfig<T> {
    fn default() -> Self {
        Self {
            alpha1: T::lit(4.0),
            alpha2: T::lit(5.0),
            eta: T::lit(0.5),
            click_match: ClickMatch::Exact,
            similarity_backend: SimilarityBackend::TokenF1,
            zero_total_on_format_failure: false,
        }
    }
}

impl<T: Real> RewardConfig<T> {
    pub fn validate(&self) -> Result<(), RewardError> {
        let bad = |m: String| Err(RewardError::InvalidConfig(m));
        if !(self.alpha1 >= T::zero() && self.alpha1.is_finite()) {
            return bad(format!("alpha1 must be a finite value >= 0, got {}", self.alpha1));
        }
        if !(self.alpha2 >= T::zero() && self.alpha2.is_finite()) {
            return bad(format!("alpha2 must be a finite value >= 0, got {}", self.alpha2));
        }
        if !(self.eta > T::zero() && self.eta < T::one()) {
            return bad(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if let ClickMatch::Radius { radius_fraction } = self.click_match {
            if !(radius_fraction > T::zero() && radius_fraction <= T::one()) {
                return bad(format!("radius_fraction must lie in (0, 1], got {radius_fraction}"));
            }
        }
        Ok(())
    }

    /// Upper bound of the composite reward, `1 + α1 + α2`.
    pub fn max_total(&self) -> T {
        T::one() + self.alpha1 + self.alpha2
    }
}

/// Per-response reward components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown<T> {
    pub format: T,
    pub loc: T,
    pub lin: T,
    pub lev: T,
    pub gate_open: bool,
    pub total: T,
}

/// Matching details reported alongside a breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardDiagnostics<T> {
    /// Index of the nearest prediction for each ground-truth element.
    pub assignment: Vec<Option<usize>>,
    /// Normalized distance from each ground-truth element to its match.
    pub distances: Vec<Option<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredResponse<T> {
    pub breakdown: RewardBreakdown<T>,
    pub diagnostics: RewardDiagnostics<T>,
}

/// For every ground-truth element, the index of the nearest prediction
/// (lowest index on ties). Several ground-truth elements may share one prediction.
pub fn match_elements(preds: &[PredictedElement], gts: &[UIElementGT]) -> Vec<Option<usize>> {
    gts.iter()
        .map(|gt| {
            preds
                .iter()
                .enumerate()
                .min_by_key(|(i, p)| (p.loc.squared_distance(gt.loc), *i))
                .map(|(i, _)| i)
        })
        .collect()
}

fn check_inputs(gts: &[UIElementGT], assignment: &[Option<usize>]) -> Result<(), RewardError> {
    if gts.is_empty() {
        return Err(RewardError::NoGroundTruth);
    }
    if assignment.len() != gts.len() {
        return Err(RewardError::AssignmentLength {
            expected: gts.len(),
            got: assignment.len(),
        });
    }
    Ok(())
}

fn assigned(preds: &[PredictedElement], slot: Option<usize>) -> Option<&PredictedElement> {
    slot.and_then(|j| preds.get(j))
}

/// Mean over ground-truth elements of `1 − distance` to the matched
/// prediction; unmatched elements contribute 0. Clamped to `[0, 1]`.
pub fn location_reward<T: Real>(
    preds: &[PredictedElement],
    gts: &[UIElementGT],
    screen: &ScreenMeta,
    assignment: &[Option<usize>],
) -> Result<T, RewardError> {
    check_inputs(gts, assignment)?;
    let sum: T = gts
        .iter()
        .zip(assignment)
        .filter_map(|(gt, slot)| {
            assigned(preds, *slot).map(|p| T::one() - raw_normalized_distance::<T>(p.loc, gt.loc, screen))
        })
        .sum();
    let r = sum / T::from_count(gts.len());
    Ok(r.max(T::zero()).min(T::one()))
}

/// Mean over ground-truth elements of the description similarity to the
/// matched prediction; unmatched elements contribute 0.
pub fn lingualization_reward<T: Real>(
    preds: &[PredictedElement],
    gts: &[UIElementGT],
    assignment: &[Option<usize>],
    sim: &dyn Similarity<T>,
) -> Result<T, RewardError> {
    check_inputs(gts, assignment)?;
    let mut sum = T::zero();
    for (gt, slot) in gts.iter().zip(assignment) {
        if let Some(p) = assigned(preds, *slot) {
            sum = sum + sim.similarity(&gt.lin, &p.lin)?;
        }
    }
    Ok(sum / T::from_count(gts.len()))
}

/// `0` on action-type mismatch. Otherwise click and long_press compare points,
/// scroll/type/open_app/select compare normalized input text, and every other
/// type scores `1`.
pub fn leverage_reward<T: Real>(pred: &Action, gt: &Action, screen: &ScreenMeta, config: &RewardConfig<T>) -> T {
    if pred.action_type != gt.action_type {
        return T::zero();
    }
    let hit = match gt.action_type {
        ActionType::Click | ActionType::LongPress => points_match(pred, gt, screen, &config.click_match),
        ActionType::Scroll | ActionType::Type | ActionType::OpenApp | ActionType::Select => {
            text_eq(&pred.input_text, &gt.input_text)
        }
        _ => true,
    };
    indicator(hit)
}

fn points_match<T: Real>(pred: &Action, gt: &Action, screen: &ScreenMeta, mode: &ClickMatch<T>) -> bool {
    match mode {
        ClickMatch::Exact => pred.point == gt.point,
        ClickMatch::Radius { radius_fraction } => {
            if pred.point.is_sentinel() || gt.point.is_sentinel() {
                return pred.point == gt.point;
            }
            raw_normalized_distance::<T>(pred.point, gt.point, screen) <= *radius_fraction
        }
    }
}

/// Assembles the composite from its components. The gate is strict: `loc·lin > η`.
pub fn compose<T: Real>(format: T, loc: T, lin: T, lev: T, config: &RewardConfig<T>) -> RewardBreakdown<T> {
    let product = loc * lin;
    let gate_open = product > config.eta;
    let total = format + config.alpha1 * product + config.alpha2 * indicator::<T>(gate_open) * lev;
    RewardBreakdown {
        format,
        loc,
        lin,
        lev,
        gate_open,
        total,
    }
}

/// Scores one parsed response against a sample.
///
/// Components are computed from whatever the parser extracted even when the
/// format check failed; in that case only the format term is zero.
pub fn total_reward<T: Real>(
    response: &ParsedResponse,
    sample: &Sample,
    config: &RewardConfig<T>,
    sim: &dyn Similarity<T>,
) -> Result<RewardBreakdown<T>, RewardError> {
    score_response(response, sample, config, sim).map(|s| s.breakdown)
}

/// [`total_reward`] plus the matching diagnostics.
pub fn score_response<T: Real>(
    response: &ParsedResponse,
    sample: &Sample,
    config: &RewardConfig<T>,
    sim: &dyn Similarity<T>,
) -> Result<ScoredResponse<T>, RewardError> {
    let gts = &sample.gt_elements;
    if gts.is_empty() {
        return Err(RewardError::NoGroundTruth);
    }
    let preds = &response.elements;
    let assignment = match_elements(preds, gts);
    let loc = location_reward(preds, gts, &sample.screen, &assignment)?;
    let lin = lingualization_reward(preds, gts, &assignment, sim)?;
    let lev = response
        .first_action()
        .map(|a| leverage_reward(a, &sample.gt_action, &sample.screen, config))
        .unwrap_or_else(T::zero);
    let mut breakdown = compose(format_reward(response), loc, lin, lev, config);
    if !response.format_ok && config.zero_total_on_format_failure {
        breakdown.total = T::zero();
    }
    let distances = gts
        .iter()
        .zip(&assignment)
        .map(|(gt, slot)| assigned(preds, *slot).map(|p| raw_normalized_distance(p.loc, gt.loc, &sample.screen)))
        .collect();
    Ok(ScoredResponse {
        breakdown,
        diagnostics: RewardDiagnostics { assignment, distances },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Point, Source};
    use crate::parser::{parse_response, render_response};
    use crate::similarity::TokenF1;

    fn el(x: i64, y: i64, lin: &str) -> UIElementGT {
        UIElementGT {
            loc: Point::new(x, y),
            lin: lin.into(),
            lev: Action::click(x, y),
        }
    }

    fn pred(x: i64, y: i64, lin: &str) -> PredictedElement {
        PredictedElement::new(Point::new(x, y), lin)
    }

    fn square() -> ScreenMeta {
        ScreenMeta::new("sq", 1000, 1000)
    }

    fn sample(gts: Vec<UIElementGT>, action: Action) -> Sample {
        Sample {
            sample_id: "s".into(),
            instruction: "do it".into(),
            history: vec![],
            screen: square(),
            gt_elements: gts,
            gt_action: action,
            reasoning_chains: vec![],
            source: Source::Web,
            gt_bbox: None,
        }
    }

    #[test]
    fn match_elements_cases() {
        assert_eq!(match_elements(&[pred(10, 10, "a")], &[el(10, 10, "a")]), vec![Some(0)]);
        // gt (60,0): d0 = 60, d1 = 40 → 1;  gt (10,0): d0 = 10, d1 = 90 → 0
        assert_eq!(
            match_elements(&[pred(0, 0, "a"), pred(100, 0, "b")], &[el(60, 0, "x"), el(10, 0, "y")]),
            vec![Some(1), Some(0)]
        );
        assert_eq!(match_elements(&[], &[el(5, 5, "a")]), vec![None]);
    }

    #[test]
    fn match_ties_take_lowest_index() {
        assert_eq!(
            match_elements(&[pred(0, 0, "a"), pred(20, 0, "b")], &[el(10, 0, "x")]),
            vec![Some(0)]
        );
    }

    #[test]
    fn location_reward_cases() {
        let s = square();
        let gts = [el(0, 0, "a")];
        let exact = [pred(0, 0, "a")];
        let r: f64 = location_reward(&exact, &gts, &s, &match_elements(&exact, &gts)).unwrap();
        assert_eq!(r, 1.0);
        let off = [pred(300, 400, "a")];
        let r: f64 = location_reward(&off, &gts, &s, &match_elements(&off, &gts)).unwrap();
        assert!((r - (1.0 - 500.0 / 2_000_000f64.sqrt())).abs() < 1e-12);
        assert!((r - 0.646_446_609_4).abs() < 1e-9);
        let r: f64 = location_reward(&[], &gts, &s, &[None]).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(
            location_reward::<f64>(&[], &[], &s, &[]),
            Err(RewardError::NoGroundTruth)
        );
    }

    #[test]
    fn location_reward_clamps_far_off_screen_predictions() {
        let s = square();
        let gts = [el(0, 0, "a")];
        let far = [pred(5000, 5000, "a")];
        let r: f64 = location_reward(&far, &gts, &s, &match_elements(&far, &gts)).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn lingualization_cases() {
        let gts = [el(0, 0, "open the settings menu"), el(900, 900, "back arrow")];
        let echo = [pred(0, 0, "open the settings menu"), pred(900, 900, "back arrow")];
        let r: f64 = lingualization_reward(&echo, &gts, &match_elements(&echo, &gts), &TokenF1).unwrap();
        assert_eq!(r, 1.0);
        // one of two matched with similarity 4/7 → (4/7 + 0) / 2
        let one = [pred(0, 0, "settings menu icon")];
        let r: f64 = lingualization_reward(&one, &gts, &[Some(0), None], &TokenF1).unwrap();
        assert!((r - 2.0 / 7.0).abs() < 1e-15);
        assert!((r - 0.2857).abs() < 1e-4);
        let r: f64 = lingualization_reward(&[], &gts, &[None, None], &TokenF1).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn leverage_cases() {
        let s = square();
        let c = RewardConfig::<f64>::default();
        assert_eq!(leverage_reward(&Action::click(123, 300), &Action::click(123, 300), &s, &c), 1.0);
        assert_eq!(leverage_reward(&Action::click(124, 300), &Action::click(123, 300), &s, &c), 0.0);
        assert_eq!(
            leverage_reward(&Action::type_text("shanghai shopping mall"), &Action::type_text("Shanghai shopping mall."), &s, &c),
            1.0
        );
        assert_eq!(leverage_reward(&Action::scroll("up"), &Action::scroll("down"), &s, &c), 0.0);
        assert_eq!(leverage_reward(&Action::wait(), &Action::wait(), &s, &c), 1.0);
        assert_eq!(leverage_reward(&Action::wait(), &Action::press_back(), &s, &c), 0.0);
        assert_eq!(leverage_reward(&Action::long_press(1, 1), &Action::long_press(1, 2), &s, &c), 0.0);
    }

    #[test]
    fn leverage_radius_mode() {
        let s = square();
        let c = RewardConfig {
            click_match: ClickMatch::Radius { radius_fraction: 0.05 },
            ..RewardConfig::<f64>::default()
        };
        // 50 px on a 1414 px diagonal ≈ 0.0354
        assert_eq!(leverage_reward(&Action::click(50, 0), &Action::click(0, 0), &s, &c), 1.0);
        // 100 px ≈ 0.0707
        assert_eq!(leverage_reward(&Action::click(100, 0), &Action::click(0, 0), &s, &c), 0.0);
    }

    #[test]
    fn composite_examples() {
        let c = RewardConfig::<f64>::default();
        let open = compose(1.0, 0.9, 0.8, 1.0, &c);
        assert!(open.gate_open);
        // 1 + 4·0.72 + 5·1
        assert!((open.total - 8.88).abs() < 1e-12);
        let closed = compose(1.0, 0.6, 0.5, 1.0, &c);
        assert!(!closed.gate_open);
        // 1 + 4·0.30
        assert!((closed.total - 2.2).abs() < 1e-12);
    }

    #[test]
    fn gate_at_eta_is_closed() {
        let c = RewardConfig::<f64>::default();
        let b = compose(1.0, 1.0, 0.5, 1.0, &c);
        assert!(!b.gate_open);
        assert_eq!(b.total, 3.0);
    }

    #[test]
    fn perfect_response_scores_max() {
        let s = sample(vec![el(84, 1061 % 1000, "an edit icon")], Action::click(84, 61));
        let preds: Vec<_> = s.gt_elements.iter().map(PredictedElement::from).collect();
        let text = render_response(&preds, "reason", std::slice::from_ref(&s.gt_action)).unwrap();
        let b = total_reward(&parse_response(&text), &s, &RewardConfig::<f64>::default(), &TokenF1).unwrap();
        assert_eq!((b.format, b.loc, b.lin, b.lev), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(b.total, 10.0);
    }

    #[test]
    fn format_failure_keeps_components() {
        let s = sample(vec![el(10, 10, "an edit icon")], Action::click(10, 10));
        let text = "<think>x</think><ui>Located at [10, 10], an edit icon</ui><answer>[{'action': 'click', 'point': [10, 10], 'input_text': 'no input text'}]</answer>";
        let r = parse_response(text);
        assert!(!r.format_ok);
        let c = RewardConfig::<f64>::default();
        let b = total_reward(&r, &s, &c, &TokenF1).unwrap();
        assert_eq!((b.format, b.loc, b.lin, b.lev), (0.0, 1.0, 1.0, 1.0));
        assert_eq!(b.total, 9.0);
        let zeroing = RewardConfig {
            zero_total_on_format_failure: true,
            ..c
        };
        assert_eq!(total_reward(&r, &s, &zeroing, &TokenF1).unwrap().total, 0.0);
    }

    #[test]
    fn no_action_means_no_leverage() {
        let s = sample(vec![el(10, 10, "icon")], Action::click(10, 10));
        let r = parse_response("<ui>Located at [10, 10], icon</ui>");
        let b = total_reward(&r, &s, &RewardConfig::<f64>::default(), &TokenF1).unwrap();
        assert_eq!(b.lev, 0.0);
        assert_eq!(b.total, 4.0);
    }

    #[test]
    fn empty_ground_truth_is_an_error() {
        let s = sample(vec![], Action::wait());
        let r = parse_response("");
        assert_eq!(
            total_reward(&r, &s, &RewardConfig::<f64>::default(), &TokenF1),
            Err(RewardError::NoGroundTruth)
        );
    }

    #[test]
    fn diagnostics_report_assignment_and_distance() {
        let s = sample(vec![el(0, 0, "a"), el(999, 999, "b")], Action::wait());
        let r = parse_response("<ui>Located at [300, 400], a</ui><think></think><answer>[{'action': 'wait', 'point': [-100, -100], 'input_text': 'no input text'}]</answer>");
        let scored = score_response(&r, &s, &RewardConfig::<f64>::default(), &TokenF1).unwrap();
        assert_eq!(scored.diagnostics.assignment, vec![Some(0), Some(0)]);
        let d0 = scored.diagnostics.distances[0].unwrap();
        assert!((d0 - 0.353_553_390_593_273_8).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(RewardConfig::<f64>::default().validate().is_ok());
        let bad_eta = RewardConfig { eta: 1.0, ..RewardConfig::<f64>::default() };
        assert!(bad_eta.validate().is_err());
        let bad_alpha = RewardConfig { alpha1: -1.0, ..RewardConfig::<f64>::default() };
        assert!(bad_alpha.validate().is_err());
        let bad_radius = RewardConfig {
            click_match: ClickMatch::Radius { radius_fraction: 0.0 },
            ..RewardConfig::<f64>::default()
        };
        assert!(bad_radius.validate().is_err());
    }

    #[test]
    fn f32_instantiation_matches_f64_shape() {
        let c = RewardConfig::<f32>::default();
        let b = compose(1.0f32, 0.9, 0.8, 1.0, &c);
        assert!((b.total - 8.88).abs() < 1e-5);
        assert_eq!(c.max_total(), 10.0);
    }
}
