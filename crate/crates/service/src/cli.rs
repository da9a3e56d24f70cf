//! `uiloop` command line. Exit codes: 0 success, 1 validation failure,
//! 2 I/O or backend failure.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use uiloop_core::dataset::{
    join_responses, load_jsonl, read_all, read_responses, stats_markdown, write_violation_sidecar, BenchRecord,
    DatasetError, LeakGroup, SplitIndex, StatsAccumulator, StatsConfig, StatsReport,
};
use uiloop_core::evaluator::{emit_report, evaluate};
use uiloop_core::fixtures::write_corpora;
use uiloop_core::model::Sample;
use uiloop_core::parser::parse_response;
use uiloop_core::reward::{score_response, RewardError};
use uiloop_core::synth::{
    read_sources, run_pipeline, Detector, MockDetector, MockSelector, PipelineReport, Selector, SynthError,
    SELECTOR_TEMPLATE,
};
use uiloop_core::{EvalError, ReportFormat, ScoredResponse};

use crate::api::{score_group, GroupError, ScoreGroupResponse};
use crate::clients::{HttpDetector, HttpSelector};
use crate::config::{ConfigError, FileConfig, Overrides, ServiceConfig, ENV_DETECT_URL, ENV_SELECT_URL};
use crate::server::{self, similarity_for, AppState};

#[derive(Debug, Parser)]
#[command(name = "uiloop", version, about = "Score, evaluate and synthesize UI-element reasoning data")]
pub struct Cli {
    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// External similarity backend base URL.
    #[arg(long, global = true)]
    pub sim_url: Option<String>,
    #[arg(long, global = true)]
    pub detect_url: Option<String>,
    #[arg(long, global = true)]
    pub select_url: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Markdown,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// JSONL of `{sample_id, response}`.
    #[arg(long)]
    pub responses: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reward breakdown for every response line.
    Score(ScoreArgs),
    /// Rewards and advantages per rollout group (G consecutive responses per sample).
    ScoreGroup(ScoreArgs),
    /// Comprehension and action metrics over a dataset.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dataset statistics and split-leak check.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        /// Skip invalid lines (listed in `<dataset>.violations.jsonl`) instead of failing.
        #[arg(long)]
        lenient: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the synthesis pipeline over source records.
    Synth {
        #[arg(long)]
        sources: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use the deterministic in-process detector and selector.
        #[arg(long)]
        mock: bool,
        #[arg(long)]
        concurrency: Option<usize>,
    },
    /// Write the synthetic test corpora.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn validation(m: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: m.into(),
        }
    }

    fn io(m: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: m.into(),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } => CliError::io(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Read { .. } => CliError::io(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<RewardError> for CliError {
    fn from(e: RewardError) -> Self {
        match e {
            RewardError::Similarity(_) => CliError::io(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Reward { source, sample_id } => {
                let mut c = CliError::from(source);
                c.message = format!("sample {sample_id}: {}", c.message);
                c
            }
            other => CliError::validation(other.to_string()),
        }
    }
}

impl From<GroupError> for CliError {
    fn from(e: GroupError) -> Self {
        match e {
            GroupError::Reward(r) => r.into(),
            other => CliError::validation(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Dataset(d) => d.into(),
            SynthError::OutputConflict(_) => CliError::io(e.to_string()),
            other => CliError::validation(other.to_string()),
        }
    }
}

fn resolve_config(cli: &Cli, port: Option<u16>, bind: Option<String>) -> Result<ServiceConfig, CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let flags = Overrides {
        port,
        bind,
        sim_url: cli.sim_url.clone(),
        detect_url: cli.detect_url.clone(),
        select_url: cli.select_url.clone(),
    };
    Ok(ServiceConfig::resolve(file, |k| std::env::var(k).ok(), &flags)?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io(e.to_string()))
        }
    }
}

fn samples_by_id(records: Vec<BenchRecord>) -> Result<HashMap<String, Sample>, CliError> {
    let mut out = HashMap::with_capacity(records.len());
    for r in records {
        if out.insert(r.sample_id.clone(), r.to_sample()).is_some() {
            return Err(CliError::validation(format!(
                "sample id {} appears more than once in the dataset",
                r.sample_id
            )));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct ScoreLine<'a> {
    sample_id: &'a str,
    #[serde(flatten)]
    scored: ScoredResponse,
}

#[derive(Serialize)]
struct GroupLine<'a> {
    sample_id: &'a str,
    #[serde(flatten)]
    group: ScoreGroupResponse,
}

fn cmd_score(cfg: &ServiceConfig, args: &ScoreArgs) -> Result<(), CliError> {
    let samples = samples_by_id(read_all(&args.dataset)?)?;
    let sim = similarity_for(cfg);
    let mut text = String::new();
    for r in read_responses(&args.responses)? {
        let sample = samples
            .get(&r.sample_id)
            .ok_or_else(|| CliError::validation(format!("response for unknown sample {}", r.sample_id)))?;
        let scored = score_response(&parse_response(&r.response), sample, &cfg.eval.reward, sim.as_ref())?;
        text.push_str(&serde_json::to_string(&ScoreLine {
            sample_id: &r.sample_id,
            scored,
        })
        .expect("score serializes"));
        text.push('\n');
    }
    emit(args.out.as_deref(), &text)
}

fn cmd_score_group(cfg: &ServiceConfig, args: &ScoreArgs) -> Result<(), CliError> {
    let samples = samples_by_id(read_all(&args.dataset)?)?;
    let sim = similarity_for(cfg);
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<String>> = HashMap::new();
    for r in read_responses(&args.responses)? {
        if !groups.contains_key(&r.sample_id) {
            order.push(r.sample_id.clone());
        }
        groups.entry(r.sample_id).or_default().push(r.response);
    }
    let mut text = String::new();
    for id in &order {
        let sample = samples
            .get(id)
            .ok_or_else(|| CliError::validation(format!("responses for unknown sample {id}")))?;
        let group = score_group(sample, &groups[id], &cfg.eval.reward, &cfg.grpo, sim.as_ref())
            .map_err(|e| {
                let mut c = CliError::from(e);
                c.message = format!("sample {id}: {}", c.message);
                c
            })?;
        text.push_str(&serde_json::to_string(&GroupLine { sample_id: id, group }).expect("group serializes"));
        text.push('\n');
    }
    emit(args.out.as_deref(), &text)
}

fn cmd_evaluate(
    cfg: &ServiceConfig,
    dataset: &Path,
    responses: &Path,
    format: Format,
    label: Option<String>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let records = read_all(dataset)?;
    let pairs = join_responses(&records, read_responses(responses)?).map_err(|e| CliError::validation(e.to_string()))?;
    let sim = similarity_for(cfg);
    let report = evaluate(&pairs, &cfg.eval, sim.as_ref(), label)?;
    let fmt = match format {
        Format::Json => ReportFormat::Json,
        Format::Markdown => ReportFormat::Markdown,
    };
    let mut text = emit_report(&report, fmt);
    if !text.ends_with('\n') {
        text.push('\n');
    }
    emit(out, &text)
}

#[derive(Serialize)]
struct StatsOutput {
    stats: StatsReport,
    split_leaks: Vec<LeakGroup>,
    skipped_lines: usize,
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn cmd_stats(dataset: &Path, format: Format, bins: usize, lenient: bool, out: Option<&Path>) -> Result<(), CliError> {
    if bins == 0 {
        return Err(CliError::validation("--bins must be at least 1"));
    }
    let mut acc = StatsAccumulator::new(StatsConfig { gt_fraction_bins: bins });
    let mut index = SplitIndex::new();
    let mut reader = load_jsonl(dataset, !lenient)?;
    for r in reader.by_ref() {
        let r = r?;
        acc.push(&r);
        index.push(&r);
    }
    let skipped = reader.violations().len();
    if skipped > 0 {
        let side = sidecar(dataset, ".violations.jsonl");
        write_violation_sidecar(reader.violations(), &side)?;
        eprintln!("skipped {skipped} invalid line(s); see {}", side.display());
    }
    let output = StatsOutput {
        stats: acc.finish()?,
        split_leaks: index.leaks(),
        skipped_lines: skipped,
    };
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&output).expect("stats serialize") + "\n",
        Format::Markdown => {
            let mut t = stats_markdown(&output.stats);
            t.push_str(&format!("\nsplit leaks: {}\n", output.split_leaks.len()));
            for l in &output.split_leaks {
                t.push_str(&format!(
                    "- {} on {}: {}\n",
                    l.instruction,
                    l.screen_id,
                    l.sample_ids.join(", ")
                ));
            }
            t
        }
    };
    emit(out, &text)
}

fn cmd_synth(
    cfg: &ServiceConfig,
    sources: &Path,
    out: &Path,
    mock: bool,
    concurrency: Option<usize>,
) -> Result<PipelineReport, CliError> {
    let sources = read_sources(sources)?;
    let mut pipeline = cfg.pipeline.clone();
    if let Some(c) = concurrency {
        pipeline.concurrency = c;
    }
    let (detector, selector): (Box<dyn Detector>, Box<dyn Selector>) = if mock {
        let d = MockDetector::from_sources(&sources);
        let s = MockSelector::from_sources(&sources, &d, SELECTOR_TEMPLATE)?;
        (Box::new(d), Box::new(s))
    } else {
        let timeout = Duration::from_secs(cfg.client_timeout_secs);
        let need = |v: &Option<String>, var: &str| {
            v.clone()
                .ok_or_else(|| CliError::validation(format!("synth needs {var} (or --mock)")))
        };
        (
            Box::new(HttpDetector::new(&need(&cfg.detect_url, ENV_DETECT_URL)?, timeout)),
            Box::new(HttpSelector::new(&need(&cfg.select_url, ENV_SELECT_URL)?, timeout)),
        )
    };
    Ok(run_pipeline(
        &sources,
        detector.as_ref(),
        selector.as_ref(),
        SELECTOR_TEMPLATE,
        &pipeline,
        out,
    )?)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let (port, bind) = match &cli.command {
        Command::Serve { port, bind } => (*port, bind.clone()),
        _ => (None, None),
    };
    let cfg = resolve_config(&cli, port, bind)?;
    match &cli.command {
        Command::Score(a) => cmd_score(&cfg, a),
        Command::ScoreGroup(a) => cmd_score_group(&cfg, a),
        Command::Evaluate {
            dataset,
            responses,
            format,
            label,
            out,
        } => cmd_evaluate(&cfg, dataset, responses, *format, label.clone(), out.as_deref()),
        Command::Stats {
            dataset,
            format,
            bins,
            lenient,
            out,
        } => cmd_stats(dataset, *format, *bins, *lenient, out.as_deref()),
        Command::Synth {
            sources,
            out,
            mock,
            concurrency,
        } => {
            let report = cmd_synth(&cfg, sources, out, *mock, *concurrency)?;
            emit(None, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
            if report.retryable.is_empty() {
                Ok(())
            } else {
                Err(CliError::io(format!(
                    "{} record(s) hit client failures; rerun to retry",
                    report.retryable.len()
                )))
            }
        }
        Command::Fixtures { out, seed } => {
            let paths = write_corpora(out, *seed)?;
            let list: String = paths.iter().map(|p| format!("{}\n", p.display())).collect();
            emit(None, &list)
        }
        Command::Serve { .. } => {
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| CliError::io(e.to_string()))?;
            runtime
                .block_on(server::serve(AppState::new(cfg)))
                .map_err(|e| CliError::io(e.to_string()))
        }
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
