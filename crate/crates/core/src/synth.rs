//! Benchmark synthesis: detect candidate elements, ask a selector model for
//! the key ones plus reasoning, then filter the assembled records.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{BenchRecord, DatasetError, JsonlAppender, Split, SCHEMA_VERSION};
use crate::model::{Action, BBox, Point, PredictedElement, ScreenMeta, Source, UIElementGT};
use crate::parser::{blocks, classify_ui_block, UiBlock};

/// The selector prompt, stored verbatim.
pub const SELECTOR_TEMPLATE: &str = include_str!("../templates/selector_prompt.txt");

pub const PLACEHOLDERS: [&str; 6] = ["instruction", "history", "gt_action", "gt_bbox", "gt_input_text", "ui_info"];

const NONE: &str = "none";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("selector produced no key elements")]
    NoKeyElements,
    #[error("unknown placeholder {{{0}}} in template")]
    UnknownPlaceholder(String),
    #[error("{0} already exists and has no progress ledger")]
    OutputConflict(PathBuf),
    #[error("duplicate source sample_id {0}")]
    DuplicateSource(String),
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{client} client failed: {message}")]
pub struct ClientError {
    pub client: String,
    pub message: String,
}

impl ClientError {
    pub fn new(client: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            client: client.into(),
            message: message.into(),
        }
    }
}

/// A pre-captured (instruction, screen, action) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub sample_id: String,
    pub instruction: String,
    #[serde(default)]
    pub history: Vec<String>,
    pub screen: ScreenMeta,
    pub gt_action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_bbox: Option<BBox>,
    pub split: Split,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectedElement {
    pub x: i64,
    pub y: i64,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl DetectedElement {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

pub trait Detector: Send + Sync {
    fn detect(&self, screen: &ScreenMeta) -> Result<Vec<DetectedElement>, ClientError>;
}

pub trait Selector: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, ClientError>;
}

pub fn prompt_hash(prompt: &str) -> String {
    Sha256::digest(prompt.as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

fn seed_for(key: &str) -> u64 {
    let d = Sha256::digest(key.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

const MOCK_LABELS: [&str; 6] = ["button", "icon", "text field", "tab", "list item", "toggle"];

/// Seeded grid-free detector: element positions depend only on the screen id.
/// Anchors registered for a screen are always reported.
#[derive(Debug, Clone, Default)]
pub struct MockDetector {
    anchors: HashMap<String, Vec<Point>>,
    failing: HashSet<String>,
}

impl MockDetector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Anchors every source's target (box center or action point).
    pub fn from_sources(sources: &[SourceRecord]) -> Self {
        let mut d = Self::new();
        for s in sources {
            if let Some(p) = target_point(s) {
                d.anchor(&s.screen.screen_id, p);
            }
        }
        d
    }

    pub fn anchor(&mut self, screen_id: &str, p: Point) -> &mut Self {
        self.anchors.entry(screen_id.to_owned()).or_default().push(p);
        self
    }

    /// Makes `detect` fail for this screen.
    pub fn fail_on(&mut self, screen_id: &str) -> &mut Self {
        self.failing.insert(screen_id.to_owned());
        self
    }
}

impl Detector for MockDetector {
    fn detect(&self, screen: &ScreenMeta) -> Result<Vec<DetectedElement>, ClientError> {
        if self.failing.contains(&screen.screen_id) {
            return Err(ClientError::new("detector", format!("mock outage for {}", screen.screen_id)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed_for(&screen.screen_id));
        let w = i64::from(screen.width.max(1));
        let h = i64::from(screen.height.max(1));
        let n = rng.random_range(6..=12);
        let mut points: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.random_range(0..w), rng.random_range(0..h)))
            .collect();
        if let Some(extra) = self.anchors.get(&screen.screen_id) {
            points.extend(extra.iter().copied());
        }
        points.sort_by_key(|p| (p.y, p.x));
        points.dedup();
        Ok(points
            .into_iter()
            .map(|p| {
                let label = MOCK_LABELS[rng.random_range(0..MOCK_LABELS.len())];
                DetectedElement {
                    x: p.x,
                    y: p.y,
                    bbox: Some(BBox {
                        x1: (p.x - 20).max(0),
                        y1: (p.y - 12).max(0),
                        x2: (p.x + 20).min(w - 1),
                        y2: (p.y + 12).min(h - 1),
                    }),
                    label: Some(label.to_owned()),
                }
            })
            .collect())
    }
}

/// Scripted selector. Each prompt hash maps to a list of replies returned on
/// successive calls; the last reply repeats.
#[derive(Debug, Default)]
pub struct MockSelector {
    scripts: HashMap<String, Vec<String>>,
    calls: Mutex<HashMap<String, usize>>,
}

impl MockSelector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replaces the replies for `prompt` and resets its call count.
    pub fn script(&mut self, prompt: &str, replies: Vec<String>) -> &mut Self {
        let key = prompt_hash(prompt);
        self.calls.get_mut().unwrap_or_else(|e| e.into_inner()).remove(&key);
        self.scripts.insert(key, replies);
        self
    }

    /// Scripts a well-formed reply for every source: the detected element
    /// nearest the target, reported a few pixels off so the snap rule applies.
    pub fn from_sources(sources: &[SourceRecord], detector: &dyn Detector, template: &str) -> Result<Self, SynthError> {
        let mut sel = Self::new();
        for s in sources {
            let Ok(ui) = detector.detect(&s.screen) else {
                continue;
            };
            let prompt = render_selector_prompt(template, s, &ui)?;
            if let Some(reply) = mock_reply(s, &ui) {
                sel.script(&prompt, vec![reply]);
            }
        }
        Ok(sel)
    }

    pub fn calls(&self, prompt: &str) -> usize {
        let calls = self.calls.lock().unwrap_or_else(|e| e.into_inner());
        calls.get(&prompt_hash(prompt)).copied().unwrap_or(0)
    }

    /// Calls across all prompts.
    pub fn total_calls(&self) -> usize {
        self.calls.lock().unwrap_or_else(|e| e.into_inner()).values().sum()
    }
}

impl Selector for MockSelector {
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        let key = prompt_hash(prompt);
        let replies = self
            .scripts
            .get(&key)
            .ok_or_else(|| ClientError::new("selector", format!("no scripted reply for prompt {}", &key[..12])))?;
        let n = {
            let mut calls = self.calls.lock().unwrap_or_else(|e| e.into_inner());
            let c = calls.entry(key).or_default();
            *c += 1;
            *c - 1
        };
        Ok(replies[n.min(replies.len() - 1)].clone())
    }
}

fn target_point(s: &SourceRecord) -> Option<Point> {
    s.gt_bbox
        .map(|b| b.center())
        .or_else(|| s.gt_action.action_type.is_positional().then_some(s.gt_action.point))
}

fn mock_reply(s: &SourceRecord, ui: &[DetectedElement]) -> Option<String> {
    let chosen = match target_point(s) {
        Some(t) => ui.iter().min_by_key(|e| e.point().squared_distance(t))?,
        None => ui.first()?,
    };
    let dx = if chosen.x + 3 < i64::from(s.screen.width) { 3 } else { -3 };
    let dy = if chosen.y + 4 < i64::from(s.screen.height) { 4 } else { -4 };
    let reported = Point::new(chosen.x + dx, chosen.y + dy);
    let label = chosen.label.as_deref().unwrap_or("control");
    let desc = format!("this element is the {label} used to {}", s.instruction.to_lowercase());
    Some(format!(
        "<ui>Located at {reported}, {desc}.</ui>\n\
         <think>\nThe instruction is to {instr}.\n</think>\n\
         <think>\nLocated near {reported}, {desc}.\n</think>\n\
         <think>\nSo the action is {action}.\n</think>\n",
        instr = s.instruction.to_lowercase(),
        action = s.gt_action.action_type,
    ))
}

fn render_value(name: &str, src: &SourceRecord, ui: &[DetectedElement]) -> Option<String> {
    let v = match name {
        "instruction" => src.instruction.clone(),
        "history" => {
            if src.history.is_empty() {
                NONE.to_owned()
            } else {
                src.history.join("\n")
            }
        }
        "gt_action" => src.gt_action.action_type.to_string(),
        "gt_bbox" => match (src.gt_bbox, src.gt_action.action_type.is_positional()) {
            (Some(b), _) => b.to_string(),
            (None, true) => src.gt_action.point.to_string(),
            (None, false) => NONE.to_owned(),
        },
        "gt_input_text" => {
            if src.gt_action.action_type.is_textual() {
                src.gt_action.input_text.clone()
            } else {
                NONE.to_owned()
            }
        }
        "ui_info" => {
            if ui.is_empty() {
                NONE.to_owned()
            } else {
                let mut s = String::new();
                for (i, e) in ui.iter().enumerate() {
                    if i > 0 {
                        s.push('\n');
                    }
                    let _ = write!(s, "{i}. {}", e.point());
                    if let Some(l) = &e.label {
                        let _ = write!(s, " {l}");
                    }
                }
                s
            }
        }
        _ => return None,
    };
    Some(v)
}

fn is_placeholder_name(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// Fills `{name}` slots in `template`. Substituted values are not rescanned.
pub fn render_selector_prompt(template: &str, src: &SourceRecord, ui: &[DetectedElement]) -> Result<String, SynthError> {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_placeholder_name(&after[..close]) => {
                let name = &after[..close];
                let value = render_value(name, src, ui).ok_or_else(|| SynthError::UnknownPlaceholder(name.to_owned()))?;
                out.push_str(&value);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelectorOutput {
    pub elements: Vec<PredictedElement>,
    pub chains: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn parse_selector_output(text: &str) -> Result<SelectorOutput, SynthError> {
    let mut out = SelectorOutput::default();
    for (i, body) in blocks(text, "<ui>", "</ui>").enumerate() {
        match classify_ui_block(body) {
            UiBlock::Element(e) => out.elements.push(e),
            UiBlock::Dropped => out.warnings.push(format!("ui block {i} has non-integer or negative coordinates")),
            UiBlock::Malformed => out.warnings.push(format!("ui block {i} is not 'Located at [x, y], ...'")),
        }
    }
    if out.elements.is_empty() {
        return Err(SynthError::NoKeyElements);
    }
    out.chains = blocks(text, "<think>", "</think>")
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(str::to_owned)
        .collect();
    if out.chains.len() > 5 {
        out.warnings.push(format!("{} reasoning chains (more than 5)", out.chains.len()));
    }
    Ok(out)
}

pub fn assemble_record(src: &SourceRecord, ui: &[DetectedElement], parsed: &SelectorOutput) -> BenchRecord {
    BenchRecord {
        schema_version: SCHEMA_VERSION,
        sample_id: src.sample_id.clone(),
        instruction: src.instruction.clone(),
        history: src.history.clone(),
        screen: src.screen.clone(),
        all_elements: ui.iter().map(DetectedElement::point).collect(),
        key_ui_elements: parsed
            .elements
            .iter()
            .map(|e| UIElementGT {
                loc: e.loc,
                lin: e.lin.clone(),
                lev: src.gt_action.clone(),
            })
            .collect(),
        reasoning_chains: parsed.chains.clone(),
        gt_action: src.gt_action.clone(),
        split: src.split,
        source: src.source,
        gt_bbox: src.gt_bbox,
        detector_payload: Some(serde_json::to_value(ui).expect("detections serialize")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyRules {
    /// Max pixel distance for moving a selector location onto a detected one.
    pub snap_radius: i64,
    /// Above this many key elements the record goes to review.
    pub review_max_key_elements: usize,
    /// Above this many reasoning chains the record goes to review.
    pub review_max_chains: usize,
}

impl Default for VerifyRules {
    fn default() -> Self {
        Self {
            snap_radius: 10,
            review_max_key_elements: 8,
            review_max_chains: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Accept(BenchRecord),
    Reject(String),
    Review { record: BenchRecord, reason: String },
}

pub fn verify_record(candidate: &BenchRecord, rules: &VerifyRules) -> Verdict {
    let action_issues = candidate.gt_action.violations("gt_action", Some(&candidate.screen));
    if let Some(v) = action_issues.first() {
        return Verdict::Reject(format!("invalid ground-truth action: {}", v.rule));
    }
    if candidate.key_ui_elements.is_empty() {
        return Verdict::Reject("no key elements".into());
    }
    if candidate.key_ui_elements.iter().any(|e| !candidate.screen.contains(e.loc)) {
        return Verdict::Reject("element out of bounds".into());
    }
    if candidate.key_ui_elements.iter().any(|e| e.lin.trim().is_empty()) {
        return Verdict::Reject("empty element description".into());
    }
    if candidate.reasoning_chains.is_empty() {
        return Verdict::Reject("no reasoning chains".into());
    }

    let mut record = candidate.clone();
    let r2 = i128::from(rules.snap_radius) * i128::from(rules.snap_radius);
    for el in &mut record.key_ui_elements {
        let nearest = record
            .all_elements
            .iter()
            .copied()
            .min_by_key(|p| p.squared_distance(el.loc));
        match nearest {
            Some(p) if p.squared_distance(el.loc) <= r2 => el.loc = p,
            _ => return Verdict::Reject("key element not among detected elements".into()),
        }
    }
    if let Some(v) = record.violations().first() {
        return Verdict::Reject(format!("{}: {}", v.field, v.rule));
    }

    let mut seen = HashSet::new();
    if !record.key_ui_elements.iter().all(|e| seen.insert(e.loc)) {
        return Verdict::Review {
            record,
            reason: "two key elements snap to one detected element".into(),
        };
    }
    if record.key_ui_elements.len() > rules.review_max_key_elements {
        let reason = format!("more than {} key elements", rules.review_max_key_elements);
        return Verdict::Review { record, reason };
    }
    if record.reasoning_chains.len() > rules.review_max_chains {
        let reason = format!("more than {} reasoning chains", rules.review_max_chains);
        return Verdict::Review { record, reason };
    }
    Verdict::Accept(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub rules: VerifyRules,
    /// Extra selector calls after an unparseable reply.
    pub max_retries: usize,
    /// Records in flight at once.
    pub concurrency: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            rules: VerifyRules::default(),
            max_retries: 2,
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub total: usize,
    /// Already completed according to the ledger.
    pub skipped: usize,
    pub accepted: usize,
    pub rejected: BTreeMap<String, usize>,
    pub review_queued: usize,
    /// Client failures; these records are left for the next run.
    pub retryable: Vec<String>,
    pub warnings: usize,
}

impl PipelineReport {
    pub fn processed(&self) -> usize {
        self.accepted + self.rejected.values().sum::<usize>() + self.review_queued
    }
}

/// Entry in the review-queue file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewEntry {
    pub sample_id: String,
    pub status: ReviewStatus,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<BenchRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    Rejected,
    Review,
}

enum Outcome {
    Accepted(BenchRecord),
    Queued(ReviewEntry),
    Retryable,
}

struct Processed {
    outcome: Outcome,
    warnings: usize,
}

fn process(
    src: &SourceRecord,
    detector: &dyn Detector,
    selector: &dyn Selector,
    template: &str,
    config: &PipelineConfig,
) -> Result<Processed, SynthError> {
    let retry = Processed {
        outcome: Outcome::Retryable,
        warnings: 0,
    };
    let Ok(ui) = detector.detect(&src.screen) else {
        return Ok(retry);
    };
    let prompt = render_selector_prompt(template, src, &ui)?;
    let mut parsed = None;
    for _ in 0..=config.max_retries {
        let Ok(text) = selector.complete(&prompt) else {
            return Ok(retry);
        };
        if let Ok(p) = parse_selector_output(&text) {
            parsed = Some(p);
            break;
        }
    }
    let reject = |reason: String, candidate: Option<BenchRecord>, warnings: usize| Processed {
        outcome: Outcome::Queued(ReviewEntry {
            sample_id: src.sample_id.clone(),
            status: ReviewStatus::Rejected,
            reason,
            candidate,
        }),
        warnings,
    };
    let Some(parsed) = parsed else {
        return Ok(reject(SynthError::NoKeyElements.to_string(), None, 0));
    };
    let warnings = parsed.warnings.len();
    let candidate = assemble_record(src, &ui, &parsed);
    Ok(match verify_record(&candidate, &config.rules) {
        Verdict::Accept(r) => Processed {
            outcome: Outcome::Accepted(r),
            warnings,
        },
        Verdict::Reject(reason) => reject(reason, Some(candidate), warnings),
        Verdict::Review { record, reason } => Processed {
            outcome: Outcome::Queued(ReviewEntry {
                sample_id: src.sample_id.clone(),
                status: ReviewStatus::Review,
                reason,
                candidate: Some(record),
            }),
            warnings,
        },
    })
}

pub fn ledger_path(out_path: &Path) -> PathBuf {
    sidecar(out_path, ".ledger")
}

pub fn review_path(out_path: &Path) -> PathBuf {
    sidecar(out_path, ".review.jsonl")
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn read_ids(path: &Path, field: Option<&str>, into: &mut HashSet<String>) -> Result<(), SynthError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(DatasetError::io(path, e).into()),
    };
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| DatasetError::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match field {
            None => {
                into.insert(line.to_owned());
            }
            Some(f) => {
                // A torn final line from a crash is ignored; that record is redone.
                if let Ok(v) = serde_json::from_str::<serde_json::Value>(line) {
                    if let Some(id) = v.get(f).and_then(|x| x.as_str()) {
                        into.insert(id.to_owned());
                    }
                }
            }
        }
    }
    Ok(())
}

/// Runs every pending source through detect → select → verify and appends
/// results in source order. Completed sample ids are recorded in
/// `<out>.ledger`, so a rerun only touches unfinished records.
pub fn run_pipeline(
    sources: &[SourceRecord],
    detector: &dyn Detector,
    selector: &dyn Selector,
    template: &str,
    config: &PipelineConfig,
    out_path: &Path,
) -> Result<PipelineReport, SynthError> {
    if config.concurrency == 0 {
        return Err(SynthError::InvalidConfig("concurrency must be at least 1".into()));
    }
    let mut ids = HashSet::new();
    for s in sources {
        if !ids.insert(s.sample_id.as_str()) {
            return Err(SynthError::DuplicateSource(s.sample_id.clone()));
        }
    }
    let ledger = ledger_path(out_path);
    let review = review_path(out_path);
    if out_path.exists() && !ledger.exists() {
        return Err(SynthError::OutputConflict(out_path.to_owned()));
    }
    let mut done = HashSet::new();
    read_ids(&ledger, None, &mut done)?;
    // Appends that landed before a crash but never reached the ledger.
    read_ids(out_path, Some("sample_id"), &mut done)?;
    read_ids(&review, Some("sample_id"), &mut done)?;

    let mut ledger_w = JsonlAppender::open(&ledger)?;
    let mut out_w = JsonlAppender::open(out_path)?;
    let mut review_w: Option<JsonlAppender> = None;

    let pending: Vec<&SourceRecord> = sources.iter().filter(|s| !done.contains(&s.sample_id)).collect();
    let mut report = PipelineReport {
        total: sources.len(),
        skipped: sources.len() - pending.len(),
        ..Default::default()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.concurrency)
        .build()
        .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;

    for chunk in pending.chunks(config.concurrency) {
        let results: Vec<Result<Processed, SynthError>> = pool.install(|| {
            chunk
                .par_iter()
                .map(|s| process(s, detector, selector, template, config))
                .collect()
        });
        for (src, result) in chunk.iter().zip(results) {
            let p = result?;
            report.warnings += p.warnings;
            match p.outcome {
                Outcome::Retryable => {
                    report.retryable.push(src.sample_id.clone());
                    continue;
                }
                Outcome::Accepted(r) => {
                    out_w.append(&r)?;
                    report.accepted += 1;
                }
                Outcome::Queued(entry) => {
                    if entry.status == ReviewStatus::Rejected {
                        *report.rejected.entry(entry.reason.clone()).or_default() += 1;
                    } else {
                        report.review_queued += 1;
                    }
                    let w = match &mut review_w {
                        Some(w) => w,
                        None => review_w.insert(JsonlAppender::open(&review)?),
                    };
                    let mut line = serde_json::to_string(&entry).expect("review entry serializes");
                    line.push('\n');
                    w.append_line(&line)?;
                }
            }
            ledger_w.append_line(&format!("{}\n", src.sample_id))?;
        }
    }
    Ok(report)
}

/// Reads source records (one JSON object per line).
pub fn read_sources(path: &Path) -> Result<Vec<SourceRecord>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
