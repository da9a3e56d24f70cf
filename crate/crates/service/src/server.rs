//! HTTP scoring service. Routes are served under `/v1` and, for convenience,
//! without the prefix.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use tokio::sync::{oneshot, Semaphore};
use uiloop_core::dataset::{join_responses, read_all, read_responses, DatasetError};
use uiloop_core::evaluator::{emit_report, evaluate};
use uiloop_core::model::{Sample, Violation};
use uiloop_core::parser::parse_response;
use uiloop_core::reward::{score_response, RewardError};
use uiloop_core::{EvalError, ReportFormat, RewardConfig, Similarity, SimilarityBackend, TokenF1};

use crate::api::{
    decode_sample, score_group, ErrorBody, ErrorDetail, EvaluateRequest, GroupError, HealthResponse, SampleError,
    ScoreRequest, ScoreResponse, WireFormat, API_VERSION,
};
use crate::clients::HttpSimilarity;
use crate::config::ServiceConfig;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    violations: Vec<Violation>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            violations: Vec::new(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: ErrorDetail {
                code: self.code.into(),
                message: self.message,
                violations: self.violations,
            },
        };
        (self.status, axum::Json(body)).into_response()
    }
}

impl From<SampleError> for ApiError {
    fn from(e: SampleError) -> Self {
        match e {
            SampleError::Schema(m) => ApiError::bad_request(format!("sample: {m}")),
            SampleError::Invariant(violations) => ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                code: "invalid_sample",
                message: format!("sample violates {} invariant(s)", violations.len()),
                violations,
            },
        }
    }
}

impl From<RewardError> for ApiError {
    fn from(e: RewardError) -> Self {
        match e {
            RewardError::Similarity(_) => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "backend_unavailable", e.to_string()),
            RewardError::InvalidConfig(_) => ApiError::bad_request(e.to_string()),
            _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_sample", e.to_string()),
        }
    }
}

impl From<GroupError> for ApiError {
    fn from(e: GroupError) -> Self {
        match e {
            GroupError::Size { .. } => ApiError::bad_request(e.to_string()),
            GroupError::Reward(r) => r.into(),
            GroupError::Grpo(g) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_group", g.to_string()),
        }
    }
}

struct Inner {
    config: ServiceConfig,
    sim: Arc<dyn Similarity<f64>>,
    permits: Semaphore,
}

/// Immutable snapshot shared by every handler.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

pub fn similarity_for(config: &ServiceConfig) -> Arc<dyn Similarity<f64>> {
    match (config.eval.reward.similarity_backend, &config.sim_url) {
        (SimilarityBackend::External, Some(url)) => {
            Arc::new(HttpSimilarity::new(url, Duration::from_secs(config.client_timeout_secs)))
        }
        _ => Arc::new(TokenF1),
    }
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        let sim = similarity_for(&config);
        Self::with_similarity(config, sim)
    }

    pub fn with_similarity(config: ServiceConfig, sim: Arc<dyn Similarity<f64>>) -> Self {
        let permits = Semaphore::new(config.max_parallel);
        Self {
            inner: Arc::new(Inner { config, sim, permits }),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    /// Runs `f` on the blocking pool once a scoring slot is free.
    async fn run<R: Send + 'static>(
        &self,
        f: impl FnOnce(&ServiceConfig, &dyn Similarity<f64>) -> R + Send + 'static,
    ) -> Result<R, ApiError> {
        let _permit = self
            .inner
            .permits
            .acquire()
            .await
            .map_err(|_| ApiError::internal("worker pool closed"))?;
        let inner = Arc::clone(&self.inner);
        tokio::task::spawn_blocking(move || f(&inner.config, inner.sim.as_ref()))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))
    }
}

fn api() -> Router<AppState> {
    Router::new()
        .route("/score", post(score))
        .route("/score_group", post(score_group_handler))
        .route("/evaluate", post(evaluate_handler))
        .route("/healthz", get(healthz))
}

pub fn router(state: AppState) -> Router {
    Router::new().nest("/v1", api()).merge(api()).with_state(state)
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn json<T: serde::Serialize>(v: &T) -> Response {
    let body = serde_json::to_vec(v).expect("responses serialize");
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn request_config(req: &ScoreRequest, base: &RewardConfig) -> Result<RewardConfig, ApiError> {
    let cfg = match &req.config {
        Some(o) => o.apply(base),
        None => base.clone(),
    };
    cfg.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(cfg)
}

fn decode_score_request(body: &Bytes, base: &RewardConfig) -> Result<(Sample, Vec<String>, RewardConfig), ApiError> {
    let req: ScoreRequest = parse_body(body)?;
    let cfg = request_config(&req, base)?;
    let sample = decode_sample(req.sample)?;
    if req.responses.is_empty() {
        return Err(ApiError::bad_request("responses must not be empty"));
    }
    Ok((sample, req.responses, cfg))
}

async fn score(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let (sample, responses, cfg) = decode_score_request(&body, &state.config().eval.reward)?;
    if responses.len() != 1 {
        return Err(ApiError::bad_request(format!(
            "/score takes exactly 1 response, got {}; use /score_group",
            responses.len()
        )));
    }
    let scored = state
        .run(move |_, sim| score_response(&parse_response(&responses[0]), &sample, &cfg, sim))
        .await??;
    Ok(json(&ScoreResponse {
        schema_version: API_VERSION,
        scored,
    }))
}

async fn score_group_handler(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let (sample, responses, cfg) = decode_score_request(&body, &state.config().eval.reward)?;
    let out = state
        .run(move |c, sim| score_group(&sample, &responses, &cfg, &c.grpo, sim))
        .await??;
    Ok(json(&out))
}

/// Resolves `p` against the data root and refuses anything outside it.
fn confined(root: &Path, p: &str) -> Result<PathBuf, ApiError> {
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no such file: {p}"));
    let root = root.canonicalize().map_err(|_| ApiError::internal("data root is not accessible"))?;
    let full = root.join(p).canonicalize().map_err(|_| not_found())?;
    if !full.starts_with(&root) || !full.is_file() {
        return Err(not_found());
    }
    Ok(full)
}

fn dataset_error(e: DatasetError) -> ApiError {
    match e {
        DatasetError::Io { .. } => ApiError::internal(e.to_string()),
        DatasetError::Empty => ApiError::bad_request("empty dataset"),
        DatasetError::Invariant { violations, .. } | DatasetError::InvalidRecord { violations, .. } => ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            code: "invalid_dataset",
            message: "dataset record violates invariants".into(),
            violations,
        },
        DatasetError::Parse { .. } => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_dataset", e.to_string()),
    }
}

async fn evaluate_handler(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: EvaluateRequest = parse_body(&body)?;
    let root = &state.config().data_root;
    let dataset = confined(root, &req.dataset)?;
    let responses = confined(root, &req.responses)?;
    let (text, format) = state
        .run(move |c, sim| -> Result<(String, WireFormat), ApiError> {
            let records = read_all(&dataset).map_err(dataset_error)?;
            if records.is_empty() {
                return Err(ApiError::bad_request("empty dataset"));
            }
            let responses = read_responses(&responses).map_err(dataset_error)?;
            let pairs = join_responses(&records, responses)
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_responses", e.to_string()))?;
            let report = evaluate(&pairs, &c.eval, sim, req.label).map_err(|e| match e {
                EvalError::Reward { source, .. } => ApiError::from(source),
                EvalError::Empty => ApiError::bad_request("empty dataset"),
                other => ApiError::internal(other.to_string()),
            })?;
            let fmt = match req.format {
                WireFormat::Json => ReportFormat::Json,
                WireFormat::Markdown => ReportFormat::Markdown,
            };
            Ok((emit_report(&report, fmt), req.format))
        })
        .await??;
    let ctype = match format {
        WireFormat::Json => "application/json",
        WireFormat::Markdown => "text/markdown; charset=utf-8",
    };
    Ok(([(header::CONTENT_TYPE, ctype)], text).into_response())
}

async fn healthz(State(state): State<AppState>) -> Result<Response, ApiError> {
    let backend = state.inner.sim.name().to_owned();
    let probe = state.run(|_, sim| sim.similarity("ping", "ping")).await?;
    let (status, body) = match probe {
        Ok(_) => (
            StatusCode::OK,
            HealthResponse {
                status: "ok".into(),
                similarity_backend: backend,
                detail: None,
            },
        ),
        Err(e) => (
            StatusCode::SERVICE_UNAVAILABLE,
            HealthResponse {
                status: "degraded".into(),
                similarity_backend: backend,
                detail: Some(e.to_string()),
            },
        ),
    };
    Ok((status, json(&body)).into_response())
}

/// Serves until ctrl-c.
pub async fn serve(state: AppState) -> std::io::Result<()> {
    let c = state.config();
    let listener = tokio::net::TcpListener::bind((c.bind.as_str(), c.port)).await?;
    eprintln!("uiloop listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// A server on its own runtime thread; stops when dropped.
pub struct RunningServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl RunningServer {
    /// Binds `config.bind:config.port` (port 0 picks a free one).
    pub fn start(state: AppState) -> std::io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
        let listener = runtime.block_on(tokio::net::TcpListener::bind((
            state.config().bind.as_str(),
            state.config().port,
        )))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let _ = axum::serve(listener, router(state))
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
        });
        Ok(Self {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
