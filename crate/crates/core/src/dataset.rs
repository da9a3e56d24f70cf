//! Benchmark record format (JSONL), streaming reader and writer, statistics
//! and split hygiene.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_sample, Action, BBox, Point, Sample, ScreenMeta, Source, UIElementGT, Violation};
use crate::parser::{parse_response, ParsedResponse};
use crate::text::{normalize_text, tokens};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: record {sample_id} violates {}", join(violations))]
    Invariant {
        line: usize,
        sample_id: String,
        violations: Vec<Violation>,
    },
    #[error("record {sample_id} violates {}", join(violations))]
    InvalidRecord {
        sample_id: String,
        violations: Vec<Violation>,
    },
    #[error("empty dataset")]
    Empty,
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        DatasetError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

/// One line of a benchmark file. Field order here is the canonical on-disk order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub sample_id: String,
    pub instruction: String,
    #[serde(default)]
    pub history: Vec<String>,
    pub screen: ScreenMeta,
    /// Every detected element location.
    pub all_elements: Vec<Point>,
    pub key_ui_elements: Vec<UIElementGT>,
    #[serde(default)]
    pub reasoning_chains: Vec<String>,
    pub gt_action: Action,
    pub split: Split,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_bbox: Option<BBox>,
    /// Raw detector output (boxes, labels), carried through untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector_payload: Option<serde_json::Value>,
}

impl BenchRecord {
    pub fn to_sample(&self) -> Sample {
        Sample {
            sample_id: self.sample_id.clone(),
            instruction: self.instruction.clone(),
            history: self.history.clone(),
            screen: self.screen.clone(),
            gt_elements: self.key_ui_elements.clone(),
            gt_action: self.gt_action.clone(),
            reasoning_chains: self.reasoning_chains.clone(),
            source: self.source,
            gt_bbox: self.gt_bbox,
        }
    }

    /// Sample invariants plus the record-level ones.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            out.push(Violation::new(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        out.extend(validate_sample(&self.to_sample()).into_iter().map(|v| {
            if let Some(rest) = v.field.strip_prefix("gt_elements") {
                Violation::new(format!("key_ui_elements{rest}"), v.rule)
            } else {
                v
            }
        }));
        if self.all_elements.len() < self.key_ui_elements.len() {
            out.push(Violation::new(
                "all_elements",
                format!(
                    "{} detected elements for {} key elements",
                    self.all_elements.len(),
                    self.key_ui_elements.len()
                ),
            ));
        }
        let detected: HashSet<Point> = self.all_elements.iter().copied().collect();
        for (i, el) in self.key_ui_elements.iter().enumerate() {
            if !detected.contains(&el.loc) {
                out.push(Violation::new(
                    format!("key_ui_elements[{i}].loc"),
                    format!("{} is not among all_elements", el.loc),
                ));
            }
        }
        out
    }
}

/// A rejected line in lenient mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineViolation {
    pub line: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    pub violations: Vec<Violation>,
}

/// Single-pass record stream. Strict readers stop at the first bad line;
/// lenient readers skip it and remember why.
pub struct JsonlReader<R> {
    input: R,
    buf: String,
    line: usize,
    strict: bool,
    finished: bool,
    violations: Vec<LineViolation>,
}

impl<R: BufRead> JsonlReader<R> {
    pub fn new(input: R, strict: bool) -> Self {
        Self {
            input,
            buf: String::new(),
            line: 0,
            strict,
            finished: false,
            violations: Vec::new(),
        }
    }

    /// Lines skipped so far (lenient mode only).
    pub fn violations(&self) -> &[LineViolation] {
        &self.violations
    }

    pub fn into_violations(self) -> Vec<LineViolation> {
        self.violations
    }

    fn fail(&mut self, err: DatasetError) -> Option<Result<BenchRecord, DatasetError>> {
        if self.strict {
            self.finished = true;
            return Some(Err(err));
        }
        let lv = match err {
            DatasetError::Parse { line, message } => LineViolation {
                line,
                sample_id: None,
                violations: vec![Violation::new("record", message)],
            },
            DatasetError::Invariant {
                line,
                sample_id,
                violations,
            } => LineViolation {
                line,
                sample_id: Some(sample_id),
                violations,
            },
            other => {
                self.finished = true;
                return Some(Err(other));
            }
        };
        self.violations.push(lv);
        None
    }
}

impl<R: BufRead> Iterator for JsonlReader<R> {
    type Item = Result<BenchRecord, DatasetError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.finished {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => {
                    self.finished = true;
                    return None;
                }
                Ok(_) => {}
                Err(e) => {
                    self.finished = true;
                    return Some(Err(DatasetError::Io {
                        path: PathBuf::from(format!("<line {}>", self.line + 1)),
                        source: e,
                    }));
                }
            }
            self.line += 1;
            let text = self.buf.trim();
            if text.is_empty() {
                continue;
            }
            let record: BenchRecord = match serde_json::from_str(text) {
                Ok(r) => r,
                Err(e) => {
                    let err = DatasetError::Parse {
                        line: self.line,
                        message: e.to_string(),
                    };
                    if let Some(out) = self.fail(err) {
                        return Some(out);
                    }
                    continue;
                }
            };
            let violations = record.violations();
            if violations.is_empty() {
                return Some(Ok(record));
            }
            let err = DatasetError::Invariant {
                line: self.line,
                sample_id: record.sample_id,
                violations,
            };
            if let Some(out) = self.fail(err) {
                return Some(out);
            }
        }
        None
    }
}

/// Opens a benchmark file as a record stream.
pub fn load_jsonl(path: impl AsRef<Path>, strict: bool) -> Result<JsonlReader<BufReader<File>>, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    Ok(JsonlReader::new(BufReader::new(file), strict))
}

/// Reads every record strictly.
pub fn read_all(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>, DatasetError> {
    load_jsonl(path, true)?.collect()
}

pub fn write_violation_sidecar(violations: &[LineViolation], path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let mut out = String::new();
    for v in violations {
        out.push_str(&serde_json::to_string(v).expect("violation serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| DatasetError::io(path, e))
}

/// Canonical single-line encoding, newline included.
pub fn encode_record(r: &BenchRecord) -> String {
    let mut s = serde_json::to_string(r).expect("record serializes");
    s.push('\n');
    s
}

fn check_all(records: &[BenchRecord]) -> Result<(), DatasetError> {
    for r in records {
        let violations = r.violations();
        if !violations.is_empty() {
            return Err(DatasetError::InvalidRecord {
                sample_id: r.sample_id.clone(),
                violations,
            });
        }
    }
    Ok(())
}

/// Validates every record, then writes the file atomically. Nothing is
/// written when any record is invalid.
pub fn write_jsonl(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<usize, DatasetError> {
    let path = path.as_ref();
    check_all(records)?;
    let tmp = tmp_path(path);
    let write = || -> io::Result<()> {
        let mut w = BufWriter::new(File::create(&tmp)?);
        for r in records {
            w.write_all(encode_record(r).as_bytes())?;
        }
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        DatasetError::io(path, e)
    })?;
    Ok(records.len())
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Append-only writer that syncs each record before returning.
pub struct JsonlAppender {
    path: PathBuf,
    file: File,
}

impl JsonlAppender {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref().to_owned();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| DatasetError::io(&path, e))?;
        Ok(Self { path, file })
    }

    pub fn append(&mut self, r: &BenchRecord) -> Result<(), DatasetError> {
        check_all(std::slice::from_ref(r))?;
        self.append_line(&encode_record(r))
    }

    pub fn append_line(&mut self, line: &str) -> Result<(), DatasetError> {
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| DatasetError::io(&self.path, e))
    }
}

/// One line of a responses file: the raw model output for a sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub sample_id: String,
    pub response: String,
}

pub fn read_responses(path: impl AsRef<Path>) -> Result<Vec<ResponseRecord>, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DatasetError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_responses(responses: &[ResponseRecord], path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let mut out = String::new();
    for r in responses {
        out.push_str(&serde_json::to_string(r).expect("response serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| DatasetError::io(path, e))
}

/// Pairs every record with its response, in record order. Every record needs
/// exactly one response and every response must name a known record.
pub fn join_responses(
    records: &[BenchRecord],
    responses: Vec<ResponseRecord>,
) -> Result<Vec<(Sample, ParsedResponse)>, JoinError> {
    let mut by_id: HashMap<String, String> = HashMap::with_capacity(responses.len());
    for r in responses {
        if by_id.insert(r.sample_id.clone(), r.response).is_some() {
            return Err(JoinError::DuplicateResponse(r.sample_id));
        }
    }
    let mut seen: HashSet<&str> = HashSet::with_capacity(records.len());
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        if !seen.insert(&rec.sample_id) {
            return Err(JoinError::DuplicateRecord(rec.sample_id.clone()));
        }
        let resp = by_id
            .remove(&rec.sample_id)
            .ok_or_else(|| JoinError::MissingResponse(rec.sample_id.clone()))?;
        out.push((rec.to_sample(), parse_response(&resp)));
    }
    if let Some(extra) = by_id.into_keys().min() {
        return Err(JoinError::UnknownSample(extra));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JoinError {
    #[error("no response for sample {0}")]
    MissingResponse(String),
    #[error("response for unknown sample {0}")]
    UnknownSample(String),
    #[error("more than one response for sample {0}")]
    DuplicateResponse(String),
    #[error("sample id {0} appears more than once in the dataset")]
    DuplicateRecord(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    /// Equal-width bins over the per-record key/all element ratio in `[0, 1]`.
    pub gt_fraction_bins: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self { gt_fraction_bins: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub records: usize,
    /// Records whose every key element description occurs in the reasoning chains.
    pub covered_records: usize,
    pub elements: usize,
    pub covered_elements: usize,
    pub record_rate: f64,
    pub element_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub n_records: usize,
    pub total_elements: usize,
    pub total_gt_elements: usize,
    pub unique_instructions: usize,
    pub split_counts: BTreeMap<String, usize>,
    pub source_counts: BTreeMap<String, usize>,
    /// Records with exactly one key element.
    pub single_gt_records: usize,
    pub gt_fraction_histogram: Vec<FractionBin>,
    /// Description length in whitespace tokens → number of key elements.
    pub description_token_histogram: BTreeMap<usize, usize>,
    pub mean_description_tokens: f64,
    pub coverage: BTreeMap<String, CoverageStats>,
}

/// Streaming reducer behind [`dataset_stats`]. Every quantity is an integer
/// count until [`StatsAccumulator::finish`], so record order never matters.
#[derive(Debug, Clone)]
pub struct StatsAccumulator {
    bins: Vec<usize>,
    n_records: usize,
    total_elements: usize,
    total_gt: usize,
    single_gt: usize,
    instructions: HashSet<String>,
    splits: BTreeMap<String, usize>,
    sources: BTreeMap<String, usize>,
    token_hist: BTreeMap<usize, usize>,
    token_sum: usize,
    coverage: BTreeMap<String, CoverageStats>,
}

impl StatsAccumulator {
    pub fn new(config: StatsConfig) -> Self {
        Self {
            bins: vec![0; config.gt_fraction_bins.max(1)],
            n_records: 0,
            total_elements: 0,
            total_gt: 0,
            single_gt: 0,
            instructions: HashSet::new(),
            splits: BTreeMap::new(),
            sources: BTreeMap::new(),
            token_hist: BTreeMap::new(),
            token_sum: 0,
            coverage: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, r: &BenchRecord) {
        let n_key = r.key_ui_elements.len();
        let n_all = r.all_elements.len();
        self.n_records += 1;
        self.total_elements += n_all;
        self.total_gt += n_key;
        self.single_gt += usize::from(n_key == 1);
        self.instructions.insert(r.instruction.clone());
        *self.splits.entry(r.split.as_str().to_owned()).or_default() += 1;
        *self.sources.entry(source_name(r.source).to_owned()).or_default() += 1;

        let nbins = self.bins.len();
        let bin = (n_key * nbins).checked_div(n_all).map_or(nbins - 1, |b| b.min(nbins - 1));
        self.bins[bin] += 1;

        let chains = normalize_text(&r.reasoning_chains.join(" "));
        let mut covered = 0;
        for el in &r.key_ui_elements {
            let len = tokens(&el.lin).len();
            *self.token_hist.entry(len).or_default() += 1;
            self.token_sum += len;
            let lin = normalize_text(&el.lin);
            if !lin.is_empty() && chains.contains(&lin) {
                covered += 1;
            }
        }
        let cov = self.coverage.entry(r.gt_action.action_type.as_str().to_owned()).or_default();
        cov.records += 1;
        cov.elements += n_key;
        cov.covered_elements += covered;
        cov.covered_records += usize::from(n_key > 0 && covered == n_key);
    }

    pub fn finish(self) -> Result<StatsReport, DatasetError> {
        if self.n_records == 0 {
            return Err(DatasetError::Empty);
        }
        let nbins = self.bins.len();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Ok(StatsReport {
            n_records: self.n_records,
            total_elements: self.total_elements,
            total_gt_elements: self.total_gt,
            unique_instructions: self.instructions.len(),
            split_counts: self.splits,
            source_counts: self.sources,
            single_gt_records: self.single_gt,
            gt_fraction_histogram: self
                .bins
                .iter()
                .enumerate()
                .map(|(i, &count)| FractionBin {
                    lo: i as f64 / nbins as f64,
                    hi: (i + 1) as f64 / nbins as f64,
                    count,
                })
                .collect(),
            mean_description_tokens: ratio(self.token_sum, self.total_gt),
            description_token_histogram: self.token_hist,
            coverage: self
                .coverage
                .into_iter()
                .map(|(k, mut c)| {
                    c.record_rate = ratio(c.covered_records, c.records);
                    c.element_rate = ratio(c.covered_elements, c.elements);
                    (k, c)
                })
                .collect(),
        })
    }
}

fn source_name(s: Source) -> &'static str {
    match s {
        Source::Web => "web",
        Source::Mobile => "mobile",
        Source::Os => "os",
        Source::Derived => "derived",
    }
}

pub fn dataset_stats<'a>(
    records: impl IntoIterator<Item = &'a BenchRecord>,
    config: StatsConfig,
) -> Result<StatsReport, DatasetError> {
    let mut acc = StatsAccumulator::new(config);
    for r in records {
        acc.push(r);
    }
    acc.finish()
}

/// Human-readable summary: totals, the key-element share histogram, description
/// lengths and per-action coverage.
pub fn stats_markdown(s: &StatsReport) -> String {
    let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
    let mut out = String::new();
    let _ = writeln!(out, "| records | elements | key elements | key share | unique instructions |");
    let _ = writeln!(out, "|---|---|---|---|---|");
    let _ = writeln!(
        out,
        "| {} | {} | {} | {:.1}% | {} |",
        s.n_records,
        s.total_elements,
        s.total_gt_elements,
        pct(s.total_gt_elements, s.total_elements),
        s.unique_instructions
    );
    let _ = writeln!(out, "\nsplits: {}", kv(&s.split_counts));
    let _ = writeln!(out, "sources: {}", kv(&s.source_counts));
    let _ = writeln!(
        out,
        "records with a single key element: {} ({:.1}%)",
        s.single_gt_records,
        pct(s.single_gt_records, s.n_records)
    );
    let _ = writeln!(out, "\n| key/all share | records |\n|---|---|");
    for b in &s.gt_fraction_histogram {
        let _ = writeln!(out, "| {:.2}-{:.2} | {} |", b.lo, b.hi, b.count);
    }
    let _ = writeln!(
        out,
        "\n| description tokens | elements |\n|---|---|"
    );
    for (len, n) in &s.description_token_histogram {
        let _ = writeln!(out, "| {len} | {n} |");
    }
    let _ = writeln!(out, "\nmean description length: {:.2} tokens", s.mean_description_tokens);
    let _ = writeln!(out, "\n| action | records | fully covered | elements covered |\n|---|---|---|---|");
    for (action, c) in &s.coverage {
        let _ = writeln!(
            out,
            "| {action} | {} | {:.1}% | {:.1}% |",
            c.records,
            100.0 * c.record_rate,
            100.0 * c.element_rate
        );
    }
    out
}

fn kv(m: &BTreeMap<String, usize>) -> String {
    m.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ")
}

/// Records sharing one (instruction, screen_id) key across train and test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakGroup {
    pub instruction: String,
    pub screen_id: String,
    pub sample_ids: Vec<String>,
}

/// Streaming form of [`check_split_isolation`]; keeps only the grouping keys.
#[derive(Debug, Clone, Default)]
pub struct SplitIndex {
    groups: HashMap<(String, String), (Vec<String>, HashSet<Split>)>,
}

impl SplitIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: &BenchRecord) {
        let g = self
            .groups
            .entry((r.instruction.clone(), r.screen.screen_id.clone()))
            .or_default();
        g.0.push(r.sample_id.clone());
        g.1.insert(r.split);
    }

    /// Groups present in more than one split, sorted by key.
    pub fn leaks(self) -> Vec<LeakGroup> {
        let mut leaks: Vec<LeakGroup> = self
            .groups
            .into_iter()
            .filter(|(_, (_, splits))| splits.len() > 1)
            .map(|((instruction, screen_id), (sample_ids, _))| LeakGroup {
                instruction,
                screen_id,
                sample_ids,
            })
            .collect();
        leaks.sort_by(|a, b| (&a.instruction, &a.screen_id).cmp(&(&b.instruction, &b.screen_id)));
        leaks
    }
}

pub fn check_split_isolation<'a>(records: impl IntoIterator<Item = &'a BenchRecord>) -> Vec<LeakGroup> {
    let mut idx = SplitIndex::new();
    for r in records {
        idx.push(r);
    }
    idx.leaks()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn record(id: &str, split: Split) -> BenchRecord {
        BenchRecord {
            schema_version: SCHEMA_VERSION,
            sample_id: id.into(),
            instruction: format!("instruction {id}"),
            history: vec![],
            screen: ScreenMeta::new(format!("screen-{id}"), 1080, 1920),
            all_elements: vec![Point::new(10, 10), Point::new(500, 600)],
            key_ui_elements: vec![UIElementGT {
                loc: Point::new(500, 600),
                lin: "the Search button".into(),
                lev: Action::click(500, 600),
            }],
            reasoning_chains: vec!["I should press the search button.".into()],
            gt_action: Action::click(500, 600),
            split,
            source: Source::Mobile,
            gt_bbox: None,
            detector_payload: None,
        }
    }

    fn lines(rs: &[BenchRecord]) -> String {
        rs.iter().map(encode_record).collect()
    }

    #[test]
    fn three_record_fixture_loads_clean() {
        let rs = [record("a", Split::Train), record("b", Split::Test), record("c", Split::Test)];
        let mut reader = JsonlReader::new(Cursor::new(lines(&rs)), true);
        let got: Vec<_> = reader.by_ref().collect::<Result<_, _>>().unwrap();
        assert_eq!(got, rs.to_vec());
        assert!(reader.violations().is_empty());
    }

    #[test]
    fn strict_mode_names_the_line() {
        let mut bad = record("b", Split::Test);
        bad.key_ui_elements.clear();
        let text = lines(&[record("a", Split::Train), bad, record("c", Split::Test)]);
        let results: Vec<_> = JsonlReader::new(Cursor::new(text), true).collect();
        assert_eq!(results.len(), 2, "stream stops after the failing line");
        match &results[1] {
            Err(DatasetError::Invariant { line, sample_id, violations }) => {
                assert_eq!(*line, 2);
                assert_eq!(sample_id, "b");
                assert_eq!(violations[0].field, "key_ui_elements");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lenient_mode_skips_and_reports() {
        let mut bad = record("b", Split::Test);
        bad.key_ui_elements[0].loc = Point::new(1, 1);
        let text = format!("{}not json\n{}\n{}", lines(&[record("a", Split::Train)]), "", lines(&[bad]));
        let mut reader = JsonlReader::new(Cursor::new(text), false);
        let got: Vec<_> = reader.by_ref().collect::<Result<_, _>>().unwrap();
        assert_eq!(got.len(), 1);
        let v = reader.violations();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].line, 2);
        assert_eq!(v[1].line, 4);
        assert_eq!(v[1].violations[0].field, "key_ui_elements[0].loc");
    }

    #[test]
    fn write_round_trip_and_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let rs = vec![record("a", Split::Train), record("b", Split::Test)];
        let p1 = dir.path().join("one.jsonl");
        let p2 = dir.path().join("two.jsonl");
        assert_eq!(write_jsonl(&rs, &p1).unwrap(), 2);
        let back = read_all(&p1).unwrap();
        assert_eq!(back, rs);
        write_jsonl(&back, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn invalid_record_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut bad = record("b", Split::Test);
        bad.gt_action.action_type = "swipe".into();
        let p = dir.path().join("out.jsonl");
        assert!(matches!(
            write_jsonl(&[record("a", Split::Train), bad], &p),
            Err(DatasetError::InvalidRecord { .. })
        ));
        assert!(!p.exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn canonical_field_order() {
        let line = encode_record(&record("a", Split::Train));
        let keys = [
            "\"schema_version\"",
            "\"sample_id\"",
            "\"instruction\"",
            "\"history\"",
            "\"screen\"",
            "\"all_elements\"",
            "\"key_ui_elements\"",
            "\"reasoning_chains\"",
            "\"gt_action\"",
            "\"split\"",
            "\"source\"",
        ];
        let positions: Vec<_> = keys.iter().map(|k| line.find(k).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{line}");
    }

    #[test]
    fn gt_fraction_and_coverage() {
        let r = record("a", Split::Train);
        let s = dataset_stats([&r], StatsConfig::default()).unwrap();
        // 1 of 2 elements → 0.5 → bin [0.5, 0.6)
        assert_eq!(s.gt_fraction_histogram[5].count, 1);
        assert_eq!(s.total_elements, 2);
        assert_eq!(s.total_gt_elements, 1);
        let c = &s.coverage["click"];
        assert_eq!((c.covered_elements, c.covered_records), (1, 1));
        assert_eq!(s.description_token_histogram[&3], 1);
        let md = stats_markdown(&s);
        assert!(md.contains("| 1 | 2 | 1 | 50.0% | 1 |"), "{md}");
        assert!(md.contains("| click | 1 | 100.0% | 100.0% |"), "{md}");
    }

    #[test]
    fn uncovered_when_chain_omits_description() {
        let mut r = record("a", Split::Train);
        r.reasoning_chains = vec!["press search".into()];
        let s = dataset_stats([&r], StatsConfig::default()).unwrap();
        assert_eq!(s.coverage["click"].element_rate, 0.0);
    }

    #[test]
    fn empty_stats_is_an_error() {
        assert!(matches!(
            dataset_stats(std::iter::empty(), StatsConfig::default()),
            Err(DatasetError::Empty)
        ));
    }

    #[test]
    fn split_isolation() {
        let a = record("a", Split::Train);
        let b = record("b", Split::Test);
        assert!(check_split_isolation([&a, &b]).is_empty());
        let mut dup = record("c", Split::Test);
        dup.instruction = a.instruction.clone();
        dup.screen.screen_id = a.screen.screen_id.clone();
        let leaks = check_split_isolation([&a, &b, &dup]);
        assert_eq!(leaks.len(), 1);
        assert_eq!(leaks[0].sample_ids, vec!["a".to_string(), "c".to_string()]);
    }

    #[test]
    fn same_split_duplicates_are_not_leaks() {
        let a = record("a", Split::Test);
        let mut b = record("b", Split::Test);
        b.instruction = a.instruction.clone();
        b.screen.screen_id = a.screen.screen_id.clone();
        assert!(check_split_isolation([&a, &b]).is_empty());
    }

    #[test]
    fn schema_version_mismatch_is_a_violation() {
        let mut r = record("a", Split::Train);
        r.schema_version = 2;
        assert_eq!(r.violations()[0].field, "schema_version");
    }

    #[test]
    fn join_is_strict_both_ways() {
        let rs = vec![record("a", Split::Test), record("b", Split::Test)];
        let resp = |id: &str| ResponseRecord {
            sample_id: id.into(),
            response: format!("r{id}"),
        };
        let joined = join_responses(&rs, vec![resp("b"), resp("a")]).unwrap();
        assert_eq!(joined[0].0.sample_id, "a");
        assert_eq!(joined[0].1.raw, "ra");
        assert_eq!(join_responses(&rs, vec![resp("a")]).unwrap_err(), JoinError::MissingResponse("b".into()));
        assert_eq!(join_responses(&rs, vec![resp("a"), resp("b"), resp("z")]).unwrap_err(), JoinError::UnknownSample("z".into()));
        assert_eq!(join_responses(&rs, vec![resp("a"), resp("a")]).unwrap_err(), JoinError::DuplicateResponse("a".into()));
        let twice = vec![rs[0].clone(), rs[0].clone()];
        assert_eq!(join_responses(&twice, vec![resp("a")]).unwrap_err(), JoinError::DuplicateRecord("a".into()));
    }
}
