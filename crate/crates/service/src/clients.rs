//! Blocking HTTP clients for the external similarity, detector and selector
//! backends. One `ureq::Agent` per client keeps a shared connection pool.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use uiloop_core::model::ScreenMeta;
use uiloop_core::synth::{ClientError, DetectedElement, Detector, Selector};
use uiloop_core::{Similarity, SimilarityError};

fn agent(timeout: Duration) -> ureq::Agent {
    let config = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build();
    ureq::Agent::new_with_config(config)
}

fn endpoint(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path)
}

fn post_json<B: Serialize, R: DeserializeOwned>(agent: &ureq::Agent, url: &str, body: &B) -> Result<R, String> {
    let mut resp = agent.post(url).send_json(body).map_err(|e| format!("POST {url}: {e}"))?;
    let status = resp.status().as_u16();
    if status != 200 {
        let text = resp.body_mut().read_to_string().unwrap_or_default();
        let text: String = text.chars().take(200).collect();
        return Err(format!("POST {url}: HTTP {status} {text}"));
    }
    resp.body_mut()
        .read_json()
        .map_err(|e| format!("POST {url}: malformed reply: {e}"))
}

#[derive(Serialize)]
struct SimilarityRequest<'a> {
    a: &'a str,
    b: &'a str,
}

#[derive(Deserialize)]
struct SimilarityReply {
    score: f64,
}

/// `POST {base}/similarity {a, b}` → `{score}`.
#[derive(Debug, Clone)]
pub struct HttpSimilarity {
    agent: ureq::Agent,
    url: String,
}

impl HttpSimilarity {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        Self {
            agent: agent(timeout),
            url: endpoint(base_url, "similarity"),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Similarity<f64> for HttpSimilarity {
    fn similarity(&self, a: &str, b: &str) -> Result<f64, SimilarityError> {
        let err = |message: String| SimilarityError {
            backend: "external".into(),
            message,
        };
        let reply: SimilarityReply = post_json(&self.agent, &self.url, &SimilarityRequest { a, b }).map_err(err)?;
        if !(0.0..=1.0).contains(&reply.score) {
            return Err(err(format!("score {} outside [0, 1]", reply.score)));
        }
        Ok(reply.score)
    }

    fn name(&self) -> &str {
        "external"
    }
}

#[derive(Serialize)]
struct DetectRequest<'a> {
    screen_ref: &'a str,
}

#[derive(Deserialize)]
struct DetectReply {
    elements: Vec<DetectedElement>,
}

/// `POST {base}/detect {screen_ref}` → `{elements: [{x, y, box?, label?}]}`.
/// The screen reference is the image reference when present, else the screen id.
#[derive(Debug, Clone)]
pub struct HttpDetector {
    agent: ureq::Agent,
    url: String,
}

impl HttpDetector {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        Self {
            agent: agent(timeout),
            url: endpoint(base_url, "detect"),
        }
    }
}

impl Detector for HttpDetector {
    fn detect(&self, screen: &ScreenMeta) -> Result<Vec<DetectedElement>, ClientError> {
        let screen_ref = screen.image_ref.as_deref().unwrap_or(&screen.screen_id);
        let reply: DetectReply =
            post_json(&self.agent, &self.url, &DetectRequest { screen_ref }).map_err(|m| ClientError::new("detector", m))?;
        Ok(reply.elements)
    }
}

#[derive(Serialize)]
struct CompleteRequest<'a> {
    prompt: &'a str,
}

#[derive(Deserialize)]
struct CompleteReply {
    text: String,
}

/// `POST {base}/complete {prompt}` → `{text}`.
#[derive(Debug, Clone)]
pub struct HttpSelector {
    agent: ureq::Agent,
    url: String,
}

impl HttpSelector {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        Self {
            agent: agent(timeout),
            url: endpoint(base_url, "complete"),
        }
    }
}

impl Selector for HttpSelector {
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        let reply: CompleteReply =
            post_json(&self.agent, &self.url, &CompleteRequest { prompt }).map_err(|m| ClientError::new("selector", m))?;
        Ok(reply.text)
    }
}
