//! Domain types: screens, points, actions, UI elements and samples.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::text::normalize_text;

/// Literal input text carried by actions that type nothing.
pub const NO_INPUT_TEXT: &str = "no input text";

/// Screen identity and pixel dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScreenMeta {
    pub screen_id: String,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
}

impl ScreenMeta {
    pub fn new(screen_id: impl Into<String>, width: u32, height: u32) -> Self {
        Self {
            screen_id: screen_id.into(),
            width,
            height,
            image_ref: None,
        }
    }

    pub fn diagonal(&self) -> f64 {
        (f64::from(self.width).powi(2) + f64::from(self.height).powi(2)).sqrt()
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0 && p.y >= 0 && p.x < i64::from(self.width) && p.y < i64::from(self.height)
    }
}

/// Integer pixel coordinate. `[-100, -100]` marks actions that have no location.
///
/// Serialized as a two-element array, matching the `'point': [x, y]` form models emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub x: i64,
    pub y: i64,
}

impl Point {
    pub const SENTINEL: Point = Point { x: -100, y: -100 };

    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    pub fn is_sentinel(self) -> bool {
        self == Self::SENTINEL
    }

    /// Negative coordinates other than the sentinel pair.
    pub fn is_malformed(self) -> bool {
        !self.is_sentinel() && (self.x < 0 || self.y < 0)
    }

    pub(crate) fn squared_distance(self, other: Point) -> i128 {
        let dx = i128::from(self.x) - i128::from(other.x);
        let dy = i128::from(self.y) - i128::from(other.y);
        dx * dx + dy * dy
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.x, self.y)
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [x, y] = <[i64; 2]>::deserialize(deserializer)?;
        Ok(Point { x, y })
    }
}

/// Axis-aligned box `[x1, y1, x2, y2]` in pixels, inclusive on both corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BBox {
    pub x1: i64,
    pub y1: i64,
    pub x2: i64,
    pub y2: i64,
}

impl BBox {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x1 && p.x <= self.x2 && p.y >= self.y1 && p.y <= self.y2
    }

    pub fn center(&self) -> Point {
        Point::new((self.x1 + self.x2) / 2, (self.y1 + self.y2) / 2)
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.x1, self.y1, self.x2, self.y2)
    }
}

impl Serialize for BBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.x1, self.y1, self.x2, self.y2].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [x1, y1, x2, y2] = <[i64; 4]>::deserialize(deserializer)?;
        Ok(BBox { x1, y1, x2, y2 })
    }
}

/// Action vocabulary. Strings outside the vocabulary are kept verbatim in
/// [`ActionType::Unknown`] so that untrusted input can be scored and reported
/// instead of rejected at decode time.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionType {
    Wait,
    LongPress,
    Click,
    PressBack,
    Type,
    OpenApp,
    Scroll,
    Select,
    Unknown(String),
}

impl ActionType {
    pub const KNOWN: [ActionType; 8] = [
        ActionType::Wait,
        ActionType::LongPress,
        ActionType::Click,
        ActionType::PressBack,
        ActionType::Type,
        ActionType::OpenApp,
        ActionType::Scroll,
        ActionType::Select,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            ActionType::Wait => "wait",
            ActionType::LongPress => "long_press",
            ActionType::Click => "click",
            ActionType::PressBack => "press_back",
            ActionType::Type => "type",
            ActionType::OpenApp => "open_app",
            ActionType::Scroll => "scroll",
            ActionType::Select => "select",
            ActionType::Unknown(s) => s,
        }
    }

    pub fn is_known(&self) -> bool {
        !matches!(self, ActionType::Unknown(_))
    }

    /// Actions compared by point: click and long_press.
    pub fn is_positional(&self) -> bool {
        matches!(self, ActionType::Click | ActionType::LongPress)
    }

    /// Actions compared by input text.
    pub fn is_textual(&self) -> bool {
        matches!(
            self,
            ActionType::Type | ActionType::OpenApp | ActionType::Scroll | ActionType::Select
        )
    }

    /// Actions that must carry the sentinel point.
    pub fn requires_sentinel(&self) -> bool {
        matches!(
            self,
            ActionType::Wait
                | ActionType::PressBack
                | ActionType::Type
                | ActionType::OpenApp
                | ActionType::Scroll
        )
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActionType {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Self::KNOWN
            .iter()
            .find(|k| k.as_str() == s)
            .cloned()
            .unwrap_or_else(|| ActionType::Unknown(s.to_owned())))
    }
}

impl From<&str> for ActionType {
    fn from(s: &str) -> Self {
        s.parse().unwrap_or_else(|e: std::convert::Infallible| match e {})
    }
}

impl Serialize for ActionType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ActionType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(ActionType::from(s.as_str()))
    }
}

pub const SCROLL_DIRECTIONS: [&str; 4] = ["up", "down", "left", "right"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub action_type: ActionType,
    pub point: Point,
    pub input_text: String,
}

impl Action {
    pub fn new(action_type: ActionType, point: Point, input_text: impl Into<String>) -> Self {
        Self {
            action_type,
            point,
            input_text: input_text.into(),
        }
    }

    pub fn click(x: i64, y: i64) -> Self {
        Self::new(ActionType::Click, Point::new(x, y), NO_INPUT_TEXT)
    }

    pub fn long_press(x: i64, y: i64) -> Self {
        Self::new(ActionType::LongPress, Point::new(x, y), NO_INPUT_TEXT)
    }

    pub fn wait() -> Self {
        Self::new(ActionType::Wait, Point::SENTINEL, NO_INPUT_TEXT)
    }

    pub fn press_back() -> Self {
        Self::new(ActionType::PressBack, Point::SENTINEL, NO_INPUT_TEXT)
    }

    pub fn type_text(text: impl Into<String>) -> Self {
        Self::new(ActionType::Type, Point::SENTINEL, text)
    }

    pub fn open_app(name: impl Into<String>) -> Self {
        Self::new(ActionType::OpenApp, Point::SENTINEL, name)
    }

    pub fn scroll(direction: impl Into<String>) -> Self {
        Self::new(ActionType::Scroll, Point::SENTINEL, direction)
    }

    /// Invariant violations of this action, prefixed with `field`.
    /// Positional points are checked against `screen` when given.
    pub fn violations(&self, field: &str, screen: Option<&ScreenMeta>) -> Vec<Violation> {
        let mut out = Vec::new();
        let at = &self.action_type;
        if !at.is_known() {
            out.push(Violation::new(
                format!("{field}.action_type"),
                format!("'{}' is not in the action enum", at.as_str()),
            ));
            return out;
        }
        if self.point.is_malformed() {
            out.push(Violation::new(
                format!("{field}.point"),
                format!("negative coordinate {} is not the sentinel", self.point),
            ));
        }
        if at.requires_sentinel() && !self.point.is_sentinel() {
            out.push(Violation::new(
                format!("{field}.point"),
                format!("{at} must carry the sentinel point [-100, -100]"),
            ));
        }
        if at.is_positional() {
            if self.point.is_sentinel() {
                out.push(Violation::new(
                    format!("{field}.point"),
                    format!("positional action {at} carries the sentinel point"),
                ));
            } else if let Some(screen) = screen {
                if !self.point.is_malformed() && !screen.contains(self.point) {
                    out.push(Violation::new(
                        format!("{field}.point"),
                        format!(
                            "{} lies outside the {}x{} screen",
                            self.point, screen.width, screen.height
                        ),
                    ));
                }
            }
        }
        if at.is_textual() {
            let norm = normalize_text(&self.input_text);
            if *at == ActionType::Scroll {
                if !SCROLL_DIRECTIONS.contains(&norm.as_str()) {
                    out.push(Violation::new(
                        format!("{field}.input_text"),
                        format!("scroll direction '{}' is not one of up/down/left/right", self.input_text),
                    ));
                }
            } else if norm.is_empty() || norm == NO_INPUT_TEXT {
                out.push(Violation::new(
                    format!("{field}.input_text"),
                    format!("{at} requires specific input text"),
                ));
            }
        } else if self.input_text != NO_INPUT_TEXT {
            out.push(Violation::new(
                format!("{field}.input_text"),
                format!("{at} must carry the literal '{NO_INPUT_TEXT}'"),
            ));
        }
        out
    }
}

/// Ground-truth key UI element: location, description, intended usage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UIElementGT {
    pub loc: Point,
    pub lin: String,
    pub lev: Action,
}

/// Element emitted by a model inside a `<ui>` block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedElement {
    pub loc: Point,
    pub lin: String,
}

impl PredictedElement {
    pub fn new(loc: Point, lin: impl Into<String>) -> Self {
        Self {
            loc,
            lin: lin.into(),
        }
    }
}

impl From<&UIElementGT> for PredictedElement {
    fn from(gt: &UIElementGT) -> Self {
        Self {
            loc: gt.loc,
            lin: gt.lin.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Web,
    Mobile,
    Os,
    Derived,
}

/// One evaluation or training sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub sample_id: String,
    pub instruction: String,
    #[serde(default)]
    pub history: Vec<String>,
    pub screen: ScreenMeta,
    pub gt_elements: Vec<UIElementGT>,
    pub gt_action: Action,
    #[serde(default)]
    pub reasoning_chains: Vec<String>,
    pub source: Source,
    /// Target area of the ground-truth action, when the source data has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_bbox: Option<BBox>,
}

/// A broken invariant: which field and which rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

pub fn validate_screen(screen: &ScreenMeta) -> Vec<Violation> {
    let mut out = Vec::new();
    if screen.width == 0 {
        out.push(Violation::new("screen.width", "must be > 0"));
    }
    if screen.height == 0 {
        out.push(Violation::new("screen.height", "must be > 0"));
    }
    out
}

/// Violations of a ground-truth element. Locations are checked for the
/// sentinel and negative values only; on-screen checks belong to the caller.
pub fn validate_element(el: &UIElementGT, field: &str, screen: Option<&ScreenMeta>) -> Vec<Violation> {
    let mut out = Vec::new();
    if el.loc.is_sentinel() {
        out.push(Violation::new(format!("{field}.loc"), "element location is the sentinel"));
    } else if el.loc.is_malformed() {
        out.push(Violation::new(
            format!("{field}.loc"),
            format!("negative coordinate {}", el.loc),
        ));
    } else if let Some(screen) = screen {
        if !screen.contains(el.loc) {
            out.push(Violation::new(
                format!("{field}.loc"),
                format!("{} lies outside the {}x{} screen", el.loc, screen.width, screen.height),
            ));
        }
    }
    if normalize_text(&el.lin).is_empty() {
        out.push(Violation::new(format!("{field}.lin"), "description is empty after normalization"));
    }
    out.extend(el.lev.violations(&format!("{field}.lev"), screen));
    out
}

/// Every broken invariant of `s`; empty when the sample is clean.
pub fn validate_sample(s: &Sample) -> Vec<Violation> {
    let mut out = validate_screen(&s.screen);
    let screen = out.is_empty().then_some(&s.screen);
    if s.sample_id.is_empty() {
        out.push(Violation::new("sample_id", "must be non-empty"));
    }
    if s.gt_elements.is_empty() {
        out.push(Violation::new("gt_elements", "must be non-empty"));
    }
    for (i, el) in s.gt_elements.iter().enumerate() {
        out.extend(validate_element(el, &format!("gt_elements[{i}]"), screen));
    }
    out.extend(s.gt_action.violations("gt_action", screen));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> Sample {
        Sample {
            sample_id: "s1".into(),
            instruction: "Open the notes".into(),
            history: vec![],
            screen: ScreenMeta::new("scr1", 1080, 2400),
            gt_elements: vec![UIElementGT {
                loc: Point::new(84, 1061),
                lin: "this element is an icon to edit or save the document".into(),
                lev: Action::click(84, 1061),
            }],
            gt_action: Action::click(84, 1061),
            reasoning_chains: vec!["tap the icon".into()],
            source: Source::Mobile,
            gt_bbox: None,
        }
    }

    #[test]
    fn clean_fixture_has_no_violations() {
        assert_eq!(validate_sample(&fixture()), vec![]);
    }

    #[test]
    fn unknown_action_type_is_flagged() {
        let mut s = fixture();
        s.gt_action.action_type = ActionType::from("swipe");
        let v = validate_sample(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "gt_action.action_type");
    }

    #[test]
    fn click_with_sentinel_is_flagged() {
        let mut s = fixture();
        s.gt_action.point = Point::SENTINEL;
        let v = validate_sample(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "gt_action.point");
        assert!(v[0].rule.contains("sentinel"));
    }

    #[test]
    fn off_screen_point_flagged_but_not_sentinel() {
        let mut s = fixture();
        s.gt_action = Action::click(1080, 5);
        let v = validate_sample(&s);
        assert_eq!(v.len(), 1);
        assert!(v[0].rule.contains("outside"));
    }

    #[test]
    fn scroll_direction_and_text_rules() {
        assert!(Action::scroll("up").violations("a", None).is_empty());
        assert_eq!(Action::scroll("sideways").violations("a", None).len(), 1);
        assert_eq!(Action::type_text("no input text").violations("a", None).len(), 1);
        let mut wait = Action::wait();
        wait.input_text = "hello".into();
        assert_eq!(wait.violations("a", None).len(), 1);
    }

    #[test]
    fn malformed_point_and_empty_lin() {
        let mut s = fixture();
        s.gt_elements[0].loc = Point::new(-3, 4);
        s.gt_elements[0].lin = " ?! ".into();
        let fields: Vec<_> = validate_sample(&s).into_iter().map(|v| v.field).collect();
        assert!(fields.contains(&"gt_elements[0].loc".to_string()));
        assert!(fields.contains(&"gt_elements[0].lin".to_string()));
    }

    #[test]
    fn action_type_serde_keeps_unknown_text() {
        let a: Action =
            serde_json::from_str(r#"{"action_type":"swipe","point":[1,2],"input_text":"x"}"#).unwrap();
        assert_eq!(a.action_type, ActionType::Unknown("swipe".into()));
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            r#"{"action_type":"swipe","point":[1,2],"input_text":"x"}"#
        );
    }

    #[test]
    fn sample_serde_round_trip_validates_clean() {
        let s = fixture();
        let back: Sample = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(validate_sample(&back).is_empty());
    }
}
