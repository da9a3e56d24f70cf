//! Synthetic corpora shared by tests, benchmarks and `uiloop fixtures`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{write_jsonl, write_responses, BenchRecord, DatasetError, ResponseRecord, Split, SCHEMA_VERSION};
use crate::model::{Action, ActionType, BBox, Point, PredictedElement, ScreenMeta, Source, UIElementGT, SCROLL_DIRECTIONS};
use crate::parser::render_response;
use crate::synth::SourceRecord;

/// A published comprehension result, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub label: &'static str,
    pub locate: f64,
    pub lingualize: f64,
    pub leverage: f64,
    pub overall: f64,
}

const fn row(label: &'static str, locate: f64, lingualize: f64, leverage: f64, overall: f64) -> ReferenceRow {
    ReferenceRow {
        label,
        locate,
        lingualize,
        leverage,
        overall,
    }
}

pub const REFERENCE_ROWS: [ReferenceRow; 12] = [
    row("GPT-4o", 22.5, 30.7, 11.8, 0.8),
    row("Qwen2.5-VL-3B-Instruct", 48.7, 9.5, 36.6, 1.7),
    row("Qwen2.5-VL-7B-Instruct", 46.8, 27.5, 29.1, 3.7),
    row("GUI-Owl-7B", 61.9, 21.1, 41.0, 5.4),
    row("GUI-Owl-7B w/ UILoop", 87.4, 51.1, 53.4, 23.8),
    row("OS-Atlas-Pro-7B", 49.6, 48.2, 18.9, 4.5),
    row("OS-Atlas-Pro-7B w/ UILoop", 71.4, 54.2, 34.9, 13.5),
    row("UI-R1-3B", 47.1, 39.7, 33.7, 6.3),
    row("GUI-R1-3B", 47.4, 37.9, 35.9, 6.4),
    row("GUI-R1-7B", 62.6, 47.6, 35.3, 10.5),
    row("UILoop-3B", 80.3, 44.7, 50.2, 18.0),
    row("UILoop-7B", 86.4, 49.3, 61.3, 26.1),
];

const CORPUS_DESC: &str = "the search button";
const CORPUS_WRONG_DESC: &str = "zzz qqq";

/// `n` records plus responses whose per-sample Locate/Lingualize/Leverage are
/// each 0 or 1, with exactly `round(fraction · n)` ones per metric.
///
/// Every screen is 1000×1000 with the key element at (0, 0). A miss on
/// location puts the prediction at (1000, 1000), one full diagonal away; a
/// miss on wording uses disjoint tokens; a miss on usage answers `wait`.
pub fn comprehension_corpus(
    locate: f64,
    lingualize: f64,
    leverage: f64,
    n: usize,
) -> (Vec<BenchRecord>, Vec<ResponseRecord>) {
    let hits = |f: f64| (f * n as f64).round() as usize;
    let (kl, kn, kv) = (hits(locate), hits(lingualize), hits(leverage));
    let mut records = Vec::with_capacity(n);
    let mut responses = Vec::with_capacity(n);
    for i in 0..n {
        let id = format!("cmp-{i:05}");
        let target = Point::new(0, 0);
        let gt_action = Action::click(0, 0);
        records.push(BenchRecord {
            schema_version: SCHEMA_VERSION,
            sample_id: id.clone(),
            instruction: "search for weather".into(),
            history: vec![],
            screen: ScreenMeta::new(format!("screen-{i:05}"), 1000, 1000),
            all_elements: vec![target, Point::new(500, 500)],
            key_ui_elements: vec![UIElementGT {
                loc: target,
                lin: CORPUS_DESC.into(),
                lev: gt_action.clone(),
            }],
            reasoning_chains: vec!["tap the search button".into()],
            gt_action,
            split: Split::Test,
            source: Source::Mobile,
            gt_bbox: None,
            detector_payload: None,
        });
        let loc = if i < kl { target } else { Point::new(1000, 1000) };
        let lin = if i < kn { CORPUS_DESC } else { CORPUS_WRONG_DESC };
        let action = if i < kv { Action::click(0, 0) } else { Action::wait() };
        let response = render_response(&[PredictedElement::new(loc, lin)], "find the search button", &[action])
            .expect("corpus responses render");
        responses.push(ResponseRecord { sample_id: id, response });
    }
    (records, responses)
}

pub fn reference_corpus(row: &ReferenceRow, n: usize) -> (Vec<BenchRecord>, Vec<ResponseRecord>) {
    comprehension_corpus(row.locate / 100.0, row.lingualize / 100.0, row.leverage / 100.0, n)
}

const WORDS: [&str; 24] = [
    "search", "button", "settings", "menu", "icon", "the", "tab", "profile", "open", "notes", "slide", "share", "it's",
    "Wi-Fi", "toggle", "(beta)", "list", "item", "back", "arrow", "text", "field", "cart", "home",
];

fn phrase(rng: &mut impl Rng, min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    (0..n)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

fn point_on(rng: &mut impl Rng, screen: &ScreenMeta) -> Point {
    Point::new(
        rng.random_range(0..i64::from(screen.width)),
        rng.random_range(0..i64::from(screen.height)),
    )
}

fn random_action(rng: &mut impl Rng, screen: &ScreenMeta) -> Action {
    match ActionType::KNOWN[rng.random_range(0..ActionType::KNOWN.len())] {
        ActionType::Click => {
            let p = point_on(rng, screen);
            Action::click(p.x, p.y)
        }
        ActionType::LongPress => {
            let p = point_on(rng, screen);
            Action::long_press(p.x, p.y)
        }
        ActionType::Wait => Action::wait(),
        ActionType::PressBack => Action::press_back(),
        ActionType::Type => Action::type_text(phrase(rng, 1, 4)),
        ActionType::OpenApp => Action::open_app(phrase(rng, 1, 2)),
        ActionType::Scroll => Action::scroll(SCROLL_DIRECTIONS[rng.random_range(0..4)]),
        ActionType::Select => Action::new(ActionType::Select, Point::SENTINEL, phrase(rng, 1, 3)),
        ActionType::Unknown(_) => unreachable!("KNOWN holds only known types"),
    }
}

/// A valid record with 1 to 5 key elements on a random screen size.
pub fn random_record(rng: &mut impl Rng, sample_id: &str) -> BenchRecord {
    let screen = ScreenMeta::new(
        format!("screen-{sample_id}"),
        rng.random_range(320..=2560),
        rng.random_range(320..=2560),
    );
    let gt_action = random_action(rng, &screen);
    let n_key = rng.random_range(1..=5);
    let mut key = Vec::with_capacity(n_key);
    let mut all = Vec::new();
    for _ in 0..n_key {
        let loc = point_on(rng, &screen);
        all.push(loc);
        key.push(UIElementGT {
            loc,
            lin: phrase(rng, 1, 8),
            lev: gt_action.clone(),
        });
    }
    for _ in 0..rng.random_range(0..40) {
        all.push(point_on(rng, &screen));
    }
    let chains = (0..rng.random_range(1..=5)).map(|_| phrase(rng, 3, 10)).collect();
    let gt_bbox = (gt_action.action_type.is_positional() && rng.random_bool(0.5)).then(|| {
        let p = gt_action.point;
        BBox {
            x1: (p.x - 30).max(0),
            y1: (p.y - 20).max(0),
            x2: p.x + 30,
            y2: p.y + 20,
        }
    });
    BenchRecord {
        schema_version: SCHEMA_VERSION,
        sample_id: sample_id.to_owned(),
        instruction: phrase(rng, 2, 8),
        history: (0..rng.random_range(0..3)).map(|_| phrase(rng, 2, 4)).collect(),
        screen,
        all_elements: all,
        key_ui_elements: key,
        reasoning_chains: chains,
        gt_action,
        split: if rng.random_bool(0.8) { Split::Train } else { Split::Test },
        source: [Source::Web, Source::Mobile, Source::Os][rng.random_range(0..3)],
        gt_bbox,
        detector_payload: None,
    }
}

pub fn random_records(seed: u64, n: usize) -> Vec<BenchRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| random_record(&mut rng, &format!("rnd-{i:06}"))).collect()
}

/// The response a perfect model would give: every key element echoed and the
/// ground-truth action.
pub fn perfect_response(r: &BenchRecord) -> String {
    let elements: Vec<PredictedElement> = r.key_ui_elements.iter().map(PredictedElement::from).collect();
    render_response(&elements, &r.reasoning_chains.join(" "), std::slice::from_ref(&r.gt_action))
        .expect("valid records render")
}

/// `group_size` rollouts per record for group scoring: the perfect answer,
/// one with a shuffled description, one with the wrong action, one without
/// tags and then copies of the perfect answer.
pub fn group_responses(records: &[BenchRecord], group_size: usize) -> Vec<ResponseRecord> {
    let mut out = Vec::with_capacity(records.len() * group_size);
    for r in records {
        let perfect = perfect_response(r);
        let elements: Vec<PredictedElement> = r.key_ui_elements.iter().map(PredictedElement::from).collect();
        let mut vague = elements.clone();
        for e in &mut vague {
            e.lin = "something on screen".into();
        }
        let think = r.reasoning_chains.join(" ");
        let wrong = if r.gt_action.action_type == ActionType::Wait {
            Action::press_back()
        } else {
            Action::wait()
        };
        let variants = [
            perfect.clone(),
            render_response(&vague, &think, std::slice::from_ref(&r.gt_action)).expect("valid records render"),
            render_response(&elements, &think, &[wrong]).expect("valid records render"),
            think.clone(),
        ];
        for i in 0..group_size {
            out.push(ResponseRecord {
                sample_id: r.sample_id.clone(),
                response: variants.get(i).cloned().unwrap_or_else(|| perfect.clone()),
            });
        }
    }
    out
}

/// Ten click/type samples: 7 answered exactly, 2 with the right type but the
/// wrong target or text, 1 with the wrong type.
pub fn action_fixture() -> (Vec<BenchRecord>, Vec<ResponseRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut records = Vec::new();
    let mut responses = Vec::new();
    for i in 0..10 {
        let mut r = random_record(&mut rng, &format!("act-{i:02}"));
        r.screen = ScreenMeta::new(format!("act-screen-{i}"), 1000, 1000);
        r.gt_bbox = None;
        r.gt_action = if i % 2 == 0 {
            Action::click(100 + 50 * i, 200)
        } else {
            Action::type_text(format!("query {i}"))
        };
        r.all_elements = vec![Point::new(100 + 50 * i, 200)];
        r.key_ui_elements = vec![UIElementGT {
            loc: Point::new(100 + 50 * i, 200),
            lin: "search field".into(),
            lev: r.gt_action.clone(),
        }];
        let answer = match i {
            0..=6 => r.gt_action.clone(),
            // right type, wrong text / far-off point
            7 => Action::type_text("something else"),
            8 => Action::click(999, 999),
            _ => Action::wait(),
        };
        let elements: Vec<PredictedElement> = r.key_ui_elements.iter().map(PredictedElement::from).collect();
        responses.push(ResponseRecord {
            sample_id: r.sample_id.clone(),
            response: render_response(&elements, "t", &[answer]).expect("fixture renders"),
        });
        records.push(r);
    }
    (records, responses)
}

/// Five source triples covering positional, textual and no-target actions.
pub fn pipeline_sources() -> Vec<SourceRecord> {
    let screen = |id: &str| ScreenMeta::new(id, 1080, 1920);
    let src = |id: &str, instruction: &str, action: Action, gt_bbox: Option<BBox>, split: Split| SourceRecord {
        sample_id: id.into(),
        instruction: instruction.into(),
        history: vec![],
        screen: screen(&format!("screen-{id}")),
        gt_action: action,
        gt_bbox,
        split,
        source: Source::Mobile,
    };
    let mut v = vec![
        src(
            "syn-001",
            "Open the notes section of the slide",
            Action::click(743, 724),
            Some(BBox {
                x1: 700,
                y1: 700,
                x2: 786,
                y2: 748,
            }),
            Split::Train,
        ),
        src("syn-002", "Search for weather in Paris", Action::type_text("weather in Paris"), None, Split::Train),
        src("syn-003", "Show more results", Action::scroll("down"), None, Split::Train),
        src("syn-004", "Select the first photo", Action::long_press(317, 501), None, Split::Test),
        src("syn-005", "Launch the calendar", Action::open_app("Calendar"), None, Split::Test),
    ];
    v[1].history = vec!["click [540, 120]".into()];
    v
}

/// Writes the golden corpora into `dir` and returns the paths written.
pub fn write_corpora(dir: &Path, seed: u64) -> Result<Vec<PathBuf>, DatasetError> {
    fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
    let mut written = Vec::new();
    let mut put_pair = |name: &str, (records, responses): (Vec<BenchRecord>, Vec<ResponseRecord>)| {
        let d = dir.join(format!("{name}.dataset.jsonl"));
        let r = dir.join(format!("{name}.responses.jsonl"));
        write_jsonl(&records, &d)?;
        write_responses(&responses, &r)?;
        written.push(d);
        written.push(r);
        Ok::<_, DatasetError>(())
    };
    let best = REFERENCE_ROWS[REFERENCE_ROWS.len() - 1];
    put_pair("comprehension", reference_corpus(&best, 1000))?;
    put_pair("actions", action_fixture())?;
    let random = random_records(seed, 200);
    let perfect: Vec<ResponseRecord> = random
        .iter()
        .map(|r| ResponseRecord {
            sample_id: r.sample_id.clone(),
            response: perfect_response(r),
        })
        .collect();
    let groups = group_responses(&random[..20], 5);
    put_pair("random", (random, perfect))?;
    let g = dir.join("groups.responses.jsonl");
    write_responses(&groups, &g)?;
    written.push(g);

    let sources = dir.join("pipeline.sources.jsonl");
    let text: String = pipeline_sources()
        .iter()
        .map(|s| serde_json::to_string(s).expect("source serializes") + "\n")
        .collect();
    fs::write(&sources, text).map_err(|e| DatasetError::io(&sources, e))?;
    written.push(sources);
    Ok(written)
}
