//! Grammar for tagged model output:
//!
//! ```text
//! response = ws *(ui ws) think ws answer ws
//! ui       = "<ui>" ws "Located at" ws "[" int "," int "]" [","] description "</ui>"
//! think    = "<think>" text "</think>"
//! answer   = "<answer>" ws "[" mapping *("," mapping) "]" ws "</answer>"
//! mapping  = "{" entry *("," entry) "}"          ; keys action, point, input_text, each once
//! ```
//!
//! Keys and strings may be single- or double-quoted, and `action`/`input_text`
//! values may be wrapped as `enum['a', 'b']` (the first member is taken).
//! See `docs/format.md` for the full grammar.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Action, ActionType, Point, PredictedElement};
use crate::scalar::{indicator, Real};

const UI_OPEN: &str = "<ui>";
const UI_CLOSE: &str = "</ui>";
const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const ANSWER_OPEN: &str = "<answer>";
const ANSWER_CLOSE: &str = "</answer>";
const TAGS: [&str; 6] = [UI_OPEN, UI_CLOSE, THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE];
const LOCATED_AT: &str = "Located at";

/// Structured view of one model response.
///
/// When `format_ok` is false the other fields hold whatever could be salvaged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub elements: Vec<PredictedElement>,
    pub think: String,
    pub actions: Vec<Action>,
    pub format_ok: bool,
    pub raw: String,
}

impl ParsedResponse {
    /// Equality ignoring `raw`.
    pub fn same_content(&self, other: &ParsedResponse) -> bool {
        self.elements == other.elements
            && self.think == other.think
            && self.actions == other.actions
            && self.format_ok == other.format_ok
    }

    /// The action used for scoring.
    pub fn first_action(&self) -> Option<&Action> {
        self.actions.first()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnswerError {
    #[error("expected {expected} at byte {pos}")]
    Expected { expected: &'static str, pos: usize },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("duplicate key '{0}'")]
    DuplicateKey(String),
    #[error("missing key '{0}'")]
    MissingKey(&'static str),
    #[error("point coordinate at byte {0} is not an integer")]
    NonIntegerCoordinate(usize),
    #[error("trailing content at byte {0}")]
    Trailing(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("element {index}: {reason}")]
    Element { index: usize, reason: String },
    #[error("think text contains a reserved tag")]
    Think,
    #[error("no actions to render")]
    NoActions,
    #[error("action {index}: {reason}")]
    Action { index: usize, reason: String },
}

/// Outcome of reading one `<ui>` block body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum UiBlock {
    Element(PredictedElement),
    /// Structurally fine but the coordinates are fractional or negative; the
    /// element is discarded without failing the response.
    Dropped,
    Malformed,
}

pub fn parse_response(text: &str) -> ParsedResponse {
    match parse_strict(text) {
        Some((elements, think, actions)) => ParsedResponse {
            elements,
            think,
            actions,
            format_ok: true,
            raw: text.to_owned(),
        },
        None => salvage(text),
    }
}

/// `1` when the response matches the grammar, else `0`.
pub fn format_reward<T: Real>(r: &ParsedResponse) -> T {
    indicator(r.format_ok)
}

fn parse_strict(text: &str) -> Option<(Vec<PredictedElement>, String, Vec<Action>)> {
    let mut rest = text.trim_start();
    let mut elements = Vec::new();
    while let Some(after) = rest.strip_prefix(UI_OPEN) {
        let (body, tail) = tagged_body(after, UI_CLOSE)?;
        match classify_ui_block(body) {
            UiBlock::Element(el) => elements.push(el),
            UiBlock::Dropped => {}
            UiBlock::Malformed => return None,
        }
        rest = tail.trim_start();
    }
    let (think, tail) = tagged_body(rest.strip_prefix(THINK_OPEN)?, THINK_CLOSE)?;
    let rest = tail.trim_start();
    let (answer, tail) = tagged_body(rest.strip_prefix(ANSWER_OPEN)?, ANSWER_CLOSE)?;
    if !tail.trim().is_empty() {
        return None;
    }
    let actions = parse_answer(answer).ok()?;
    if actions.is_empty() {
        return None;
    }
    Some((elements, think.trim().to_owned(), actions))
}

/// Splits `s` at the first `close`, rejecting bodies that contain any other tag.
fn tagged_body<'a>(s: &'a str, close: &str) -> Option<(&'a str, &'a str)> {
    let end = s.find(close)?;
    let body = &s[..end];
    if contains_tag(body) {
        return None;
    }
    Some((body, &s[end + close.len()..]))
}

fn contains_tag(s: &str) -> bool {
    TAGS.iter().any(|t| s.contains(t))
}

/// Best-effort extraction for responses that fail the grammar.
fn salvage(text: &str) -> ParsedResponse {
    let elements = blocks(text, UI_OPEN, UI_CLOSE)
        .filter_map(|b| match classify_ui_block(b) {
            UiBlock::Element(el) => Some(el),
            _ => None,
        })
        .collect();
    let think = blocks(text, THINK_OPEN, THINK_CLOSE)
        .next()
        .map(|t| t.trim().to_owned())
        .unwrap_or_default();
    let actions = blocks(text, ANSWER_OPEN, ANSWER_CLOSE)
        .next()
        .and_then(|a| parse_answer(a).ok())
        .unwrap_or_default();
    ParsedResponse {
        elements,
        think,
        actions,
        format_ok: false,
        raw: text.to_owned(),
    }
}

/// All non-overlapping `open … close` bodies, in order.
pub(crate) fn blocks<'a>(text: &'a str, open: &'a str, close: &'a str) -> impl Iterator<Item = &'a str> + 'a {
    let mut rest = text;
    std::iter::from_fn(move || {
        let start = rest.find(open)? + open.len();
        let len = rest[start..].find(close)?;
        let body = &rest[start..start + len];
        rest = &rest[start + len + close.len()..];
        Some(body)
    })
}

pub(crate) fn classify_ui_block(body: &str) -> UiBlock {
    let Some(rest) = body.trim_start().strip_prefix(LOCATED_AT) else {
        return UiBlock::Malformed;
    };
    let mut cur = Cursor::new(rest);
    cur.ws();
    if !cur.eat('[') {
        return UiBlock::Malformed;
    }
    cur.ws();
    let Some(x) = cur.number() else {
        return UiBlock::Malformed;
    };
    cur.ws();
    if !cur.eat(',') {
        return UiBlock::Malformed;
    }
    cur.ws();
    let Some(y) = cur.number() else {
        return UiBlock::Malformed;
    };
    cur.ws();
    if !cur.eat(']') {
        return UiBlock::Malformed;
    }
    cur.ws();
    cur.eat(',');
    let description = cur.rest().trim();
    if description.is_empty() || contains_tag(description) {
        return UiBlock::Malformed;
    }
    match (x.as_integer(), y.as_integer()) {
        (Some(x), Some(y)) if x >= 0 && y >= 0 => {
            UiBlock::Element(PredictedElement::new(Point::new(x, y), description))
        }
        _ => UiBlock::Dropped,
    }
}

/// Parses the body of an `<answer>` block into its action list.
pub fn parse_answer(body: &str) -> Result<Vec<Action>, AnswerError> {
    let mut cur = Cursor::new(body);
    cur.ws();
    cur.expect('[', "'['")?;
    cur.ws();
    let mut actions = Vec::new();
    if !cur.eat(']') {
        loop {
            cur.ws();
            actions.push(parse_mapping(&mut cur)?);
            cur.ws();
            if cur.eat(',') {
                continue;
            }
            cur.expect(']', "',' or ']'")?;
            break;
        }
    }
    cur.ws();
    if !cur.at_end() {
        return Err(AnswerError::Trailing(cur.pos));
    }
    Ok(actions)
}

fn parse_mapping(cur: &mut Cursor<'_>) -> Result<Action, AnswerError> {
    cur.expect('{', "'{'")?;
    let mut action: Option<String> = None;
    let mut point: Option<Point> = None;
    let mut input_text: Option<String> = None;
    loop {
        cur.ws();
        let key = cur.string().ok_or(AnswerError::Expected {
            expected: "quoted key",
            pos: cur.pos,
        })?;
        cur.ws();
        cur.expect(':', "':'")?;
        cur.ws();
        match key.as_str() {
            "action" => set_once(&mut action, enum_or_string(cur)?, "action")?,
            "point" => set_once(&mut point, point_literal(cur)?, "point")?,
            "input_text" => set_once(&mut input_text, enum_or_string(cur)?, "input_text")?,
            _ => return Err(AnswerError::UnknownKey(key)),
        }
        cur.ws();
        if cur.eat(',') {
            continue;
        }
        cur.expect('}', "',' or '}'")?;
        break;
    }
    Ok(Action {
        action_type: ActionType::from(action.ok_or(AnswerError::MissingKey("action"))?.as_str()),
        point: point.ok_or(AnswerError::MissingKey("point"))?,
        input_text: input_text.ok_or(AnswerError::MissingKey("input_text"))?,
    })
}

fn set_once<V>(slot: &mut Option<V>, value: V, key: &str) -> Result<(), AnswerError> {
    if slot.is_some() {
        return Err(AnswerError::DuplicateKey(key.to_owned()));
    }
    *slot = Some(value);
    Ok(())
}

/// A quoted string, or `enum[...]` of quoted strings (first member wins).
fn enum_or_string(cur: &mut Cursor<'_>) -> Result<String, AnswerError> {
    if cur.eat_str("enum") {
        cur.ws();
        cur.expect('[', "'[' after enum")?;
        let mut first = None;
        loop {
            cur.ws();
            let s = cur.string().ok_or(AnswerError::Expected {
                expected: "quoted enum member",
                pos: cur.pos,
            })?;
            first.get_or_insert(s);
            cur.ws();
            if cur.eat(',') {
                continue;
            }
            cur.expect(']', "',' or ']'")?;
            break;
        }
        return Ok(first.expect("at least one member"));
    }
    cur.string().ok_or(AnswerError::Expected {
        expected: "quoted string",
        pos: cur.pos,
    })
}

fn point_literal(cur: &mut Cursor<'_>) -> Result<Point, AnswerError> {
    cur.expect('[', "'[' opening a point")?;
    cur.ws();
    let x = integer(cur)?;
    cur.ws();
    cur.expect(',', "','")?;
    cur.ws();
    let y = integer(cur)?;
    cur.ws();
    cur.expect(']', "']' closing a point")?;
    Ok(Point::new(x, y))
}

fn integer(cur: &mut Cursor<'_>) -> Result<i64, AnswerError> {
    let pos = cur.pos;
    let n = cur.number().ok_or(AnswerError::Expected {
        expected: "integer",
        pos,
    })?;
    n.as_integer().ok_or(AnswerError::NonIntegerCoordinate(pos))
}

struct Number<'a> {
    text: &'a str,
    fractional: bool,
}

impl Number<'_> {
    fn as_integer(&self) -> Option<i64> {
        if self.fractional {
            None
        } else {
            self.text.parse().ok()
        }
    }
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(s: &'a str) -> Self {
        Self { s, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.s[self.pos..]
    }

    fn at_end(&self) -> bool {
        self.pos >= self.s.len()
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.s.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn eat_str(&mut self, lit: &str) -> bool {
        if self.rest().starts_with(lit) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char, expected: &'static str) -> Result<(), AnswerError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(AnswerError::Expected {
                expected,
                pos: self.pos,
            })
        }
    }

    /// `-?digits(.digits)?`
    fn number(&mut self) -> Option<Number<'a>> {
        let start = self.pos;
        self.eat('-');
        let digits = |c: &mut Self| {
            let n = c.rest().bytes().take_while(u8::is_ascii_digit).count();
            c.pos += n;
            n
        };
        if digits(self) == 0 {
            self.pos = start;
            return None;
        }
        let int_end = self.pos;
        let mut fractional = false;
        if self.eat('.') {
            if digits(self) == 0 {
                self.pos = int_end;
            } else {
                fractional = true;
            }
        }
        Some(Number {
            text: &self.s[start..self.pos],
            fractional,
        })
    }

    /// Single- or double-quoted string; a backslash escapes the next character.
    fn string(&mut self) -> Option<String> {
        let start = self.pos;
        let quote = match self.peek() {
            Some(q @ ('\'' | '"')) => q,
            _ => return None,
        };
        self.pos += 1;
        let mut out = String::new();
        let mut chars = self.rest().char_indices();
        while let Some((i, c)) = chars.next() {
            if c == '\\' {
                match chars.next() {
                    Some((_, e)) => out.push(e),
                    None => break,
                }
            } else if c == quote {
                self.pos += i + 1;
                return Some(out);
            } else {
                out.push(c);
            }
        }
        self.pos = start;
        None
    }
}

/// Canonical single-quoted rendering. Descriptions and think text are trimmed.
pub fn render_response(
    elements: &[PredictedElement],
    think: &str,
    actions: &[Action],
) -> Result<String, RenderError> {
    let mut out = String::new();
    for (index, el) in elements.iter().enumerate() {
        let lin = el.lin.trim();
        let reason = if el.loc.is_sentinel() || el.loc.is_malformed() {
            Some(format!("location {} is not a screen position", el.loc))
        } else if lin.is_empty() {
            Some("empty description".to_owned())
        } else if contains_tag(lin) {
            Some("description contains a reserved tag".to_owned())
        } else {
            None
        };
        if let Some(reason) = reason {
            return Err(RenderError::Element { index, reason });
        }
        out.push_str(&format!("{UI_OPEN}{LOCATED_AT} [{}, {}], {lin}{UI_CLOSE}", el.loc.x, el.loc.y));
    }
    if contains_tag(think) {
        return Err(RenderError::Think);
    }
    if actions.is_empty() {
        return Err(RenderError::NoActions);
    }
    out.push_str(THINK_OPEN);
    out.push_str(think.trim());
    out.push_str(THINK_CLOSE);
    out.push_str(ANSWER_OPEN);
    out.push('[');
    for (index, a) in actions.iter().enumerate() {
        if let Some(v) = a.violations("action", None).into_iter().next() {
            return Err(RenderError::Action {
                index,
                reason: v.to_string(),
            });
        }
        if index > 0 {
            out.push_str(", ");
        }
        out.push_str(&render_action(a));
    }
    out.push(']');
    out.push_str(ANSWER_CLOSE);
    Ok(out)
}

/// One mapping literal, e.g. `{'action': 'wait', 'point': [-100, -100], 'input_text': 'no input text'}`.
pub fn render_action(a: &Action) -> String {
    format!(
        "{{'action': {}, 'point': [{}, {}], 'input_text': {}}}",
        quote(a.action_type.as_str()),
        a.point.x,
        a.point.y,
        quote(&a.input_text)
    )
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
    out
}
