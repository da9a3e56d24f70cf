//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! when any criterion fails. The real-benchmark check prints SKIP unless
//! UILOOP_BENCH_PATH points at the data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use uiloop_core::dataset::{join_responses, load_jsonl, read_all, BenchRecord, StatsAccumulator, StatsConfig};
use uiloop_core::evaluator::{evaluate, format_percent};
use uiloop_core::fixtures::{group_responses, perfect_response, random_record, random_records, reference_corpus, REFERENCE_ROWS};
use uiloop_core::grpo::{clipped_surrogate, group_advantages, kl_penalty, GrpoConfig, TokenTrace};
use uiloop_core::model::{Action, Point, PredictedElement, UIElementGT};
use uiloop_core::parser::{format_reward, parse_response, render_response};
use uiloop_core::reward::{compose, lingualization_reward, location_reward, match_elements, score_response};
use uiloop_core::synth::{run_pipeline, MockDetector, MockSelector, PipelineConfig, SELECTOR_TEMPLATE};
use uiloop_core::{EvalConfig, RewardConfig, TokenF1};
use uiloop_service::config::{FileConfig, Overrides, ServiceConfig};
use uiloop_service::server::{AppState, RunningServer};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = Result<String, String>;
type CheckFn = fn() -> Check;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(name: &str, start: Instant, budget: Duration) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < budget, || format!("{name} took {t:.2?}, budget {budget:?}"))?;
    Ok(t)
}

fn product_consistency() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for row in REFERENCE_ROWS.iter() {
        let (records, responses) = reference_corpus(row, 1000);
        let pairs = join_responses(&records, responses).map_err(|e| e.to_string())?;
        let r = evaluate(&pairs, &EvalConfig::default(), &TokenF1, Some(row.label.to_owned()))
            .map_err(|e| e.to_string())?;
        let means = [r.locate * 100.0, r.lingualize * 100.0, r.leverage * 100.0];
        let printed = [row.locate, row.lingualize, row.leverage];
        for (m, p) in means.iter().zip(printed) {
            ensure((m - p).abs() < 1e-9, || format!("{}: component mean {m} != {p}", row.label))?;
        }
        let overall = r.overall * 100.0;
        let diff = (overall - row.overall).abs();
        worst = worst.max(diff);
        ensure(diff <= 0.1 + 1e-9, || {
            format!("{}: product {overall:.4} vs printed {} (diff {diff:.4})", row.label, row.overall)
        })?;
        ensure(format_percent(r.overall).parse::<f64>().is_ok_and(|v| (v - row.overall).abs() <= 0.1 + 1e-9), || {
            format!("{}: rounded overall {} vs {}", row.label, format_percent(r.overall), row.overall)
        })?;
    }
    let t = within_budget("product consistency", start, Duration::from_secs(1))?;
    Ok(format!("{} rows, max |product - printed| = {worst:.4} pp, {t:.2?}", REFERENCE_ROWS.len()))
}

fn perfect_responses() -> Check {
    let cfg = RewardConfig::default();
    let records = random_records(2024, 200);
    let start = Instant::now();
    for r in &records {
        let parsed = parse_response(&perfect_response(r));
        let s = score_response(&parsed, &r.to_sample(), &cfg, &TokenF1).map_err(|e| e.to_string())?;
        let b = s.breakdown;
        ensure((b.format, b.loc, b.lin, b.lev, b.total) == (1.0, 1.0, 1.0, 1.0, 10.0), || {
            format!("{}: {b:?}", r.sample_id)
        })?;
    }
    let t = within_budget("perfect responses", start, Duration::from_secs(1))?;
    Ok(format!("200 fixtures scored 10, {t:.2?}"))
}

fn brute_force(preds: &[PredictedElement], gts: &[UIElementGT]) -> Vec<Option<usize>> {
    gts.iter()
        .map(|g| {
            let mut best: Option<(i128, usize)> = None;
            for (i, p) in preds.iter().enumerate() {
                let dx = i128::from(p.loc.x - g.loc.x);
                let dy = i128::from(p.loc.y - g.loc.y);
                let d = dx * dx + dy * dy;
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, i));
                }
            }
            best.map(|(_, i)| i)
        })
        .collect()
}

fn gt_at(p: Point) -> UIElementGT {
    UIElementGT {
        loc: p,
        lin: "x".into(),
        lev: Action::wait(),
    }
}

fn matching_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let start = Instant::now();
    let mut ties = 0;
    for case in 0..500 {
        // A small coordinate range forces equal distances in some cases.
        let span = if case % 2 == 0 { 6 } else { 2000 };
        let preds: Vec<PredictedElement> = (0..rng.random_range(0..=8))
            .map(|_| PredictedElement::new(Point::new(rng.random_range(0..span), rng.random_range(0..span)), "p"))
            .collect();
        let gts: Vec<UIElementGT> = (0..rng.random_range(1..=8))
            .map(|_| gt_at(Point::new(rng.random_range(0..span), rng.random_range(0..span))))
            .collect();
        let want = brute_force(&preds, &gts);
        let got = match_elements(&preds, &gts);
        ensure(got == want, || format!("case {case}: {got:?} != {want:?}"))?;
        if span == 6 {
            ties += 1;
        }
    }
    let t = within_budget("matching oracle", start, Duration::from_secs(1))?;
    Ok(format!("500 instances ({ties} on a 6x6 grid), {t:.2?}"))
}

const WORDS: [&str; 10] = ["search", "button", "menu", "the", "open", "tab", "home", "cart", "settings", "back"];

fn phrase(rng: &mut impl Rng) -> String {
    let n = rng.random_range(1..5);
    (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

fn has_tie(preds: &[PredictedElement], gts: &[UIElementGT]) -> bool {
    gts.iter().any(|g| {
        let mut d: Vec<i64> = preds
            .iter()
            .map(|p| (p.loc.x - g.loc.x).pow(2) + (p.loc.y - g.loc.y).pow(2))
            .collect();
        d.sort_unstable();
        d.len() > 1 && d[0] == d[1]
    })
}

fn reward_properties() -> Check {
    let cfg = RewardConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let start = Instant::now();
    let mut permuted = 0;
    let mut gate_open = 0;
    for case in 0..10_000 {
        let mut r = random_record(&mut rng, &format!("p-{case}"));
        for g in &mut r.key_ui_elements {
            g.lin = phrase(&mut rng);
        }
        let screen = r.screen.clone();
        let preds: Vec<PredictedElement> = (0..rng.random_range(0..7))
            .map(|_| {
                let p = Point::new(
                    rng.random_range(0..i64::from(screen.width)),
                    rng.random_range(0..i64::from(screen.height)),
                );
                PredictedElement::new(p, phrase(&mut rng))
            })
            .collect();
        let action = if rng.random_bool(0.5) { r.gt_action.clone() } else { Action::wait() };
        let text = render_response(&preds, "t", &[action]).map_err(|e| e.to_string())?;
        let sample = r.to_sample();
        let s = score_response(&parse_response(&text), &sample, &cfg, &TokenF1).map_err(|e| e.to_string())?;
        let b = &s.breakdown;
        for (name, v) in [("format", b.format), ("loc", b.loc), ("lin", b.lin), ("lev", b.lev)] {
            ensure((0.0..=1.0).contains(&v), || format!("case {case}: {name} = {v}"))?;
        }
        ensure((0.0..=10.0).contains(&b.total), || format!("case {case}: total {}", b.total))?;
        ensure(b.gate_open == (b.loc * b.lin > 0.5), || format!("case {case}: gate {b:?}"))?;
        gate_open += usize::from(b.gate_open);

        if !has_tie(&preds, &sample.gt_elements) {
            let mut p2 = preds.clone();
            let mut g2 = sample.gt_elements.clone();
            p2.shuffle(&mut rng);
            g2.shuffle(&mut rng);
            let a1 = match_elements(&preds, &sample.gt_elements);
            let a2 = match_elements(&p2, &g2);
            let l1: f64 = location_reward(&preds, &sample.gt_elements, &screen, &a1).map_err(|e| e.to_string())?;
            let l2: f64 = location_reward(&p2, &g2, &screen, &a2).map_err(|e| e.to_string())?;
            let n1: f64 = lingualization_reward(&preds, &sample.gt_elements, &a1, &TokenF1).map_err(|e| e.to_string())?;
            let n2: f64 = lingualization_reward(&p2, &g2, &a2, &TokenF1).map_err(|e| e.to_string())?;
            ensure((l1 - l2).abs() < 1e-12 && (n1 - n2).abs() < 1e-12, || {
                format!("case {case}: permutation changed loc {l1}/{l2} lin {n1}/{n2}")
            })?;
            permuted += 1;
        }
    }
    for (loc, lin) in [(1.0, 0.5), (0.5, 1.0), (0.625, 0.8)] {
        let b = compose(1.0, loc, lin, 1.0, &cfg);
        ensure(!b.gate_open && b.total == 1.0 + 4.0 * 0.5, || format!("gate at loc*lin = 0.5: {b:?}"))?;
    }
    let b = compose(1.0, 1.0, 0.5 + 1e-12, 1.0, &cfg);
    ensure(b.gate_open, || "gate stays closed just above 0.5".into())?;
    let t = within_budget("reward properties", start, Duration::from_secs(5))?;
    Ok(format!("10000 cases ({permuted} permuted, {gate_open} gate-open), strict gate at 0.5, {t:.2?}"))
}

fn grpo_suite() -> Check {
    let cfg = GrpoConfig::new(0.2, 0.04).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let start = Instant::now();
    for case in 0..10_000 {
        let g = rng.random_range(2..17);
        let cfg = cfg.with_group_size(g);
        let rewards: Vec<f64> = (0..g).map(|_| rng.random_range(0.0..10.0)).collect();
        let adv = group_advantages(&rewards, &cfg).map_err(|e| e.to_string())?;
        let n = g as f64;
        let mean = adv.iter().sum::<f64>() / n;
        let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
        ensure(mean.abs() < 1e-9 && (std - 1.0).abs() < 1e-9, || {
            format!("case {case}: mean {mean} std {std}")
        })?;
        let c = rng.random_range(-100.0..100.0);
        let shifted: Vec<f64> = rewards.iter().map(|r| r + c).collect();
        let adv2 = group_advantages(&shifted, &cfg).map_err(|e| e.to_string())?;
        ensure(adv.iter().zip(&adv2).all(|(a, b)| (a - b).abs() < 1e-9), || {
            format!("case {case}: shift by {c} changed advantages")
        })?;
        let same = vec![rewards[0]; g];
        let zero = group_advantages(&same, &cfg).map_err(|e| e.to_string())?;
        ensure(zero.iter().all(|a| *a == 0.0), || format!("case {case}: equal rewards gave {zero:?}"))?;

        let len = rng.random_range(1..40);
        let lp = |rng: &mut ChaCha8Rng| (0..len).map(|_| rng.random_range(-8.0..0.0)).collect::<Vec<f64>>();
        let (p, o, r) = (lp(&mut rng), lp(&mut rng), lp(&mut rng));
        let kl = kl_penalty(&TokenTrace::new(p.clone(), o, r).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        ensure(kl >= 0.0, || format!("case {case}: KL {kl}"))?;
        let kl0 = kl_penalty(&TokenTrace::new(p.clone(), p.clone(), p).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        ensure(kl0 == 0.0, || format!("case {case}: KL on identical trace {kl0}"))?;
    }
    let one = |ratio: f64| TokenTrace::new(vec![ratio.ln()], vec![0.0], vec![0.0]).unwrap();
    let hand = [
        (1.5, 2.0, 2.4),
        (1.5, -2.0, -3.0),
        (0.5, 2.0, 1.0),
        (0.5, -2.0, -1.6),
        (1.1, 2.0, 2.2),
    ];
    for (ratio, a, want) in hand {
        let got = clipped_surrogate(&one(ratio), a, &cfg).map_err(|e| e.to_string())?;
        ensure((got - want).abs() < 1e-12, || format!("surrogate rho={ratio} A={a}: {got} != {want}"))?;
    }
    let t = within_budget("GRPO suite", start, Duration::from_secs(5))?;
    Ok(format!("10000 groups and KL traces, {} surrogate hand cases, {t:.2?}", hand.len()))
}

enum Mutation {
    DeleteTag,
    SwapBlocks,
    BreakQuote,
}

const TAGS: [&str; 6] = ["<ui>", "</ui>", "<think>", "</think>", "<answer>", "</answer>"];

fn mutate(text: &str, m: &Mutation, rng: &mut ChaCha8Rng) -> Option<String> {
    match m {
        Mutation::DeleteTag => {
            let spots: Vec<(usize, &str)> = TAGS.iter().flat_map(|t| text.match_indices(t)).collect();
            let (at, tag) = spots[rng.random_range(0..spots.len())];
            Some(format!("{}{}", &text[..at], &text[at + tag.len()..]))
        }
        Mutation::SwapBlocks => {
            let t0 = text.find("<think>")?;
            let t1 = text.find("</think>")? + "</think>".len();
            let a0 = text.find("<answer>")?;
            let a1 = text.find("</answer>")? + "</answer>".len();
            if rng.random_bool(0.5) || t0 == 0 {
                Some(format!("{}{}{}", &text[..t0], &text[a0..a1], &text[t0..t1]))
            } else {
                // move the first ui block behind the think block
                let u1 = text.find("</ui>")? + "</ui>".len();
                Some(format!("{}{}{}{}", &text[u1..t1], &text[..u1], &text[t1..a0], &text[a0..a1]))
            }
        }
        Mutation::BreakQuote => {
            let a0 = text.find("<answer>")?;
            // String delimiters only; an escaped quote is content, not syntax.
            let quotes: Vec<usize> = text[a0..]
                .match_indices('\'')
                .map(|(i, _)| a0 + i)
                .filter(|&i| !text[..i].ends_with('\\'))
                .collect();
            let at = quotes[rng.random_range(0..quotes.len())];
            Some(format!("{}{}", &text[..at], &text[at + 1..]))
        }
    }
}

fn parser_fuzz() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let start = Instant::now();
    let records = random_records(1000, 1000);
    let mut counts = [0usize; 3];
    for (i, r) in records.iter().enumerate() {
        let text = perfect_response(r);
        let parsed = parse_response(&text);
        ensure(format_reward::<f64>(&parsed) == 1.0, || format!("{}: valid response rejected", r.sample_id))?;
        let want: Vec<PredictedElement> = r.key_ui_elements.iter().map(PredictedElement::from).collect();
        ensure(parsed.elements == want && parsed.actions == [r.gt_action.clone()], || {
            format!("{}: round trip changed content", r.sample_id)
        })?;

        let m = match i % 3 {
            0 => Mutation::DeleteTag,
            1 => Mutation::SwapBlocks,
            _ => Mutation::BreakQuote,
        };
        let Some(bad) = mutate(&text, &m, &mut rng) else {
            return Err(format!("{}: mutation not applicable", r.sample_id));
        };
        let p = parse_response(&bad);
        let reduced = p.elements.len() + p.actions.len() < parsed.elements.len() + parsed.actions.len();
        ensure(format_reward::<f64>(&p) == 0.0 || reduced, || {
            format!("{}: mutation kept full credit:\n{bad}", r.sample_id)
        })?;
        counts[i % 3] += 1;
    }

    let pieces: Vec<&str> = TAGS.iter().copied().chain(["Located at [", "], ", "{'action': ", "'", "[", "]"]).collect();
    for case in 0..10_000 {
        let text = if case % 2 == 0 {
            let bytes: Vec<u8> = (0..rng.random_range(0..300)).map(|_| rng.random()).collect();
            String::from_utf8_lossy(&bytes).into_owned()
        } else {
            (0..rng.random_range(0..30)).map(|_| pieces[rng.random_range(0..pieces.len())]).collect()
        };
        let out = std::panic::catch_unwind(|| parse_response(&text));
        ensure(out.is_ok(), || format!("parser panicked on {text:?}"))?;
    }
    let t = within_budget("parser fuzz", start, Duration::from_secs(10))?;
    Ok(format!(
        "1000 valid, mutations {}/{}/{} (tag/order/quote), 10000 random inputs, {t:.2?}",
        counts[0], counts[1], counts[2]
    ))
}

fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/pipeline.jsonl")
}

fn pipeline_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("out.jsonl");
    let start = Instant::now();
    let sources = uiloop_core::fixtures::pipeline_sources();
    let detector = MockDetector::from_sources(&sources);
    let selector = MockSelector::from_sources(&sources, &detector, SELECTOR_TEMPLATE).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::default();
    let first = run_pipeline(&sources, &detector, &selector, SELECTOR_TEMPLATE, &cfg, &out).map_err(|e| e.to_string())?;
    ensure(first.accepted == 5, || format!("first run: {first:?}"))?;
    let bytes = std::fs::read(&out).map_err(|e| e.to_string())?;
    let want = std::fs::read(golden()).map_err(|e| e.to_string())?;
    ensure(bytes == want, || "output differs from golden file".into())?;
    let calls = selector.total_calls();
    let second = run_pipeline(&sources, &detector, &selector, SELECTOR_TEMPLATE, &cfg, &out).map_err(|e| e.to_string())?;
    ensure(second.processed() == 0 && second.skipped == 5 && selector.total_calls() == calls, || {
        format!("rerun did work: {second:?}")
    })?;
    ensure(std::fs::read(&out).map_err(|e| e.to_string())? == want, || "rerun changed output".into())?;
    let loaded = read_all(&out).map_err(|e| e.to_string())?;
    ensure(loaded.len() == 5, || format!("strict load gave {} records", loaded.len()))?;
    let t = within_budget("pipeline", start, Duration::from_secs(1))?;
    Ok(format!("golden match, resume did zero work, strict load ok, {t:.2?}"))
}

fn percentile(sorted: &[Duration], q: f64) -> Duration {
    let i = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[i]
}

fn throughput() -> Check {
    let cfg = RewardConfig::default();
    let records = random_records(99, 2500);
    let responses = group_responses(&records, 4);
    let samples: Vec<_> = records.iter().map(BenchRecord::to_sample).collect();
    let work: Vec<(usize, &str)> = responses.iter().enumerate().map(|(i, r)| (i / 4, r.response.as_str())).collect();

    // Plain loop on the calling thread: one core.
    let start = Instant::now();
    let mut checksum = 0.0;
    for (i, text) in &work {
        let s = score_response(&parse_response(text), &samples[*i], &cfg, &TokenF1).map_err(|e| e.to_string())?;
        checksum += s.breakdown.total;
    }
    let single = start.elapsed();
    ensure(single < Duration::from_secs(2), || format!("10000 scores took {single:.2?}"))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let file = FileConfig {
        port: Some(0),
        data_root: Some(dir.path().to_owned()),
        ..Default::default()
    };
    let config = ServiceConfig::resolve(file, |_| None, &Overrides::default()).map_err(|e| e.to_string())?;
    let server = RunningServer::start(AppState::new(config)).map_err(|e| e.to_string())?;
    let url = format!("{}/v1/score", server.url());

    let cases: Arc<Vec<(String, Value)>> = Arc::new(
        work.iter()
            .take(400)
            .map(|(i, text)| {
                let s = score_response(&parse_response(text), &samples[*i], &cfg, &TokenF1).unwrap();
                let mut want = serde_json::to_value(&s).unwrap();
                want["schema_version"] = json!(1);
                let body = json!({"sample": records[*i], "responses": [text]}).to_string();
                (body, want)
            })
            .collect(),
    );
    let per_worker = 100;
    let workers: Vec<_> = (0..32)
        .map(|w| {
            let cases = Arc::clone(&cases);
            let url = url.clone();
            std::thread::spawn(move || -> Result<Vec<Duration>, String> {
                let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
                let mut lat = Vec::with_capacity(per_worker);
                for k in 0..per_worker {
                    let (body, want) = &cases[(w * per_worker + k) % cases.len()];
                    let t = Instant::now();
                    let mut resp = agent
                        .post(&url)
                        .header("content-type", "application/json")
                        .send(body.as_str())
                        .map_err(|e| e.to_string())?;
                    let got: Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
                    lat.push(t.elapsed());
                    if &got != want {
                        return Err(format!("parity mismatch:\n{got}\n{want}"));
                    }
                }
                Ok(lat)
            })
        })
        .collect();
    let mut lat = Vec::new();
    for w in workers {
        lat.extend(w.join().map_err(|_| "worker panicked".to_string())??);
    }
    lat.sort();
    Ok(format!(
        "10000 scores on one thread in {single:.2?} (checksum {checksum}); /score x{} at 32-way: p50 {:.2?} p99 {:.2?}, all match in-process",
        lat.len(),
        percentile(&lat, 0.5),
        percentile(&lat, 0.99)
    ))
}

fn real_benchmark() -> Outcome {
    let Some(root) = std::env::var_os("UILOOP_BENCH_PATH") else {
        return Outcome::Skip("UILOOP_BENCH_PATH not set".into());
    };
    let root = PathBuf::from(root);
    let files: Vec<PathBuf> = if root.is_file() {
        vec![root]
    } else {
        let mut v: Vec<PathBuf> = match std::fs::read_dir(&root) {
            Ok(d) => d
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
                .collect(),
            Err(e) => return Outcome::Fail(e.to_string()),
        };
        v.sort();
        v
    };
    let mut acc = StatsAccumulator::new(StatsConfig::default());
    for f in &files {
        let reader = match load_jsonl(f, true) {
            Ok(r) => r,
            Err(e) => return Outcome::Fail(e.to_string()),
        };
        for r in reader {
            match r {
                Ok(r) => acc.push(&r),
                Err(e) => return Outcome::Fail(e.to_string()),
            }
        }
    }
    let s = match acc.finish() {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let train = s.split_counts.get("train").copied().unwrap_or(0);
    let got = (s.n_records, s.total_elements, s.total_gt_elements, train);
    let want = (26_207, 1_576_068, 57_332, 3_471);
    let msg = format!("records/elements/key elements/train = {got:?}");
    if got == want {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(format!("{msg}, expected {want:?}"))
    }
}

fn main() -> ExitCode {
    let checks: [(&str, CheckFn); 8] = [
        ("product_consistency", product_consistency),
        ("perfect_response_oracle", perfect_responses),
        ("matching_oracle", matching_oracle),
        ("reward_properties", reward_properties),
        ("grpo_numerics", grpo_suite),
        ("parser_fuzz", parser_fuzz),
        ("pipeline_determinism", pipeline_determinism),
        ("throughput", throughput),
    ];
    let mut results: Vec<(&str, Outcome)> = checks
        .iter()
        .map(|(name, f)| {
            let outcome = match std::panic::catch_unwind(f) {
                Ok(Ok(m)) => Outcome::Pass(m),
                Ok(Err(m)) => Outcome::Fail(m),
                Err(_) => Outcome::Fail("panicked".into()),
            };
            (*name, outcome)
        })
        .collect();
    results.push(("real_benchmark_totals", real_benchmark()));

    let (mut passed, mut skipped, mut failed) = (0, 0, 0);
    for (name, outcome) in &results {
        match outcome {
            Outcome::Pass(m) => {
                passed += 1;
                println!("PASS {name}: {m}");
            }
            Outcome::Skip(m) => {
                skipped += 1;
                println!("SKIP {name}: {m}");
            }
            Outcome::Fail(m) => {
                failed += 1;
                println!("FAIL {name}: {m}");
            }
        }
    }
    println!("acceptance: {passed} passed, {failed} failed, {skipped} skipped");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
