//! Chat-completion and embedding access.
//!
//! Two backends sit behind one [`Gateway`]:
//!
//! - `Http` speaks the OpenAI-compatible protocol (`POST {base_url}/chat/completions`
//!   and `POST {base_url}/embeddings`) with a bearer token read from an
//!   environment variable. Transport errors, 429 and 5xx responses are retried
//!   with exponential backoff.
//! - `Replay` serves recorded fixtures, one `<request_digest>.json` file per
//!   request, and never touches the network.
//!
//! With `record` set, every live response is written as a fixture so the same
//! run can later be replayed offline.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::digest::{fnv1a64, sha256_hex};
use crate::tokenize::word_tokens;

pub const DEFAULT_API_KEY_ENV: &str = "LLM_API_KEY";
pub const FALLBACK_EMBEDDING_DIM: usize = 256;
pub const FALLBACK_PROVIDER: &str = "hashed-bow-256";

/// Generation keeps the model's natural variability; detection minimises it.
pub const GENERATION_TEMPERATURE: f64 = 1.0;
pub const DETECTION_TEMPERATURE: f64 = 0.0;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("HTTP status {code}: {body}")]
    HttpStatus { code: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no replay fixture for request digest {0}")]
    FixtureMissing(String),
    #[error("model refused to answer (content filter)")]
    Refusal,
    #[error("invalid gateway config: {0}")]
    InvalidConfig(String),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no texts to embed")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_name: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    pub request_digest: String,
}

/// The bytes a request digest is computed over: compact JSON of
/// `{"model", "messages": [{"role", "content"}], "temperature"}` in that order.
#[derive(Serialize)]
struct DigestView<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

impl ChatRequest {
    pub fn new(model_name: impl Into<String>, messages: Vec<ChatMessage>, temperature: f64) -> Self {
        let model_name = model_name.into();
        let request_digest = Self::compute_digest(&model_name, &messages, temperature);
        Self {
            model_name,
            messages,
            temperature,
            max_tokens: None,
            request_digest,
        }
    }

    /// A single user message, the shape every pipeline prompt uses.
    pub fn user(model_name: impl Into<String>, prompt: impl Into<String>, temperature: f64) -> Self {
        Self::new(
            model_name,
            vec![ChatMessage {
                role: Role::User,
                content: prompt.into(),
            }],
            temperature,
        )
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = Some(max_tokens);
        self
    }

    pub fn compute_digest(model_name: &str, messages: &[ChatMessage], temperature: f64) -> String {
        let view = DigestView {
            model: model_name,
            messages,
            temperature,
        };
        sha256_hex(serde_json::to_vec(&view).expect("digest view serializes"))
    }

    fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidConfig("request has no messages".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidConfig(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    ContentFilter,
    Other,
}

impl FinishReason {
    fn from_wire(s: Option<&str>) -> Self {
        match s {
            Some("stop") => FinishReason::Stop,
            Some("length") => FinishReason::Length,
            Some("content_filter") => FinishReason::ContentFilter,
            _ => FinishReason::Other,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: FinishReason,
    pub usage: Usage,
    pub latency_ms: u64,
}

impl ChatResponse {
    pub fn stop(content: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            finish_reason: FinishReason::Stop,
            usage: Usage::default(),
            latency_ms: 0,
        }
    }
}

/// On-disk replay fixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fixture {
    pub request: ChatRequest,
    pub response: ChatResponse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub base_url: String,
    pub api_key_env_name: String,
    pub max_in_flight: usize,
    pub requests_per_minute: usize,
    pub retry_max: u32,
    pub retry_base_delay_ms: u64,
    pub backend: BackendKind,
    pub replay_dir: Option<PathBuf>,
    /// Write every live response to `replay_dir`.
    pub record: bool,
    pub timeout_ms: u64,
    pub embedding_model: String,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            api_key_env_name: DEFAULT_API_KEY_ENV.into(),
            max_in_flight: 4,
            requests_per_minute: 60,
            retry_max: 3,
            retry_base_delay_ms: 500,
            backend: BackendKind::Http,
            replay_dir: None,
            record: false,
            timeout_ms: 120_000,
            embedding_model: "text-embedding-3-small".into(),
        }
    }
}

impl GatewayConfig {
    pub fn replay(dir: impl Into<PathBuf>) -> Self {
        Self {
            backend: BackendKind::Replay,
            replay_dir: Some(dir.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_in_flight == 0 {
            return Err(GatewayError::InvalidConfig("max_in_flight must be positive".into()));
        }
        if self.requests_per_minute == 0 {
            return Err(GatewayError::InvalidConfig(
                "requests_per_minute must be positive".into(),
            ));
        }
        if self.backend == BackendKind::Replay && self.replay_dir.is_none() {
            return Err(GatewayError::InvalidConfig("replay backend needs replay_dir".into()));
        }
        if self.record && self.replay_dir.is_none() {
            return Err(GatewayError::InvalidConfig("recording needs replay_dir".into()));
        }
        Ok(())
    }
}

/// Sliding-window limiter: never more than `capacity` acquisitions inside any
/// window of length `window`.
#[derive(Debug)]
pub struct RateLimiter {
    capacity: usize,
    window: Duration,
    sent: Mutex<VecDeque<Instant>>,
}

impl RateLimiter {
    pub fn per_minute(capacity: usize) -> Self {
        Self::with_window(capacity, Duration::from_secs(60))
    }

    pub fn with_window(capacity: usize, window: Duration) -> Self {
        Self {
            capacity: capacity.max(1),
            window,
            sent: Mutex::new(VecDeque::new()),
        }
    }

    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut sent = self.sent.lock().unwrap();
                let now = Instant::now();
                while sent.front().is_some_and(|t| *t + self.window <= now) {
                    sent.pop_front();
                }
                if sent.len() < self.capacity {
                    sent.push_back(now);
                    return;
                }
                *sent.front().unwrap() + self.window - now
            };
            std::thread::sleep(wait);
        }
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Embedding rows in input order. `degenerate` lists rows that came out as
/// zero vectors (texts without any token).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingBatch {
    pub rows: Vec<Vec<f64>>,
    pub degenerate: Vec<usize>,
    pub provider: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EmbeddingFixture {
    model: String,
    input: Vec<String>,
    rows: Vec<Vec<f64>>,
}

/// Shareable across threads; see the module docs for backend behaviour.
#[derive(Debug)]
pub struct Gateway {
    config: GatewayConfig,
    agent: Option<ureq::Agent>,
    limiter: RateLimiter,
    slots: Slots,
}

enum Attempt<T> {
    Done(T),
    Retry(GatewayError),
    Fail(GatewayError),
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let agent = (config.backend == BackendKind::Http).then(|| {
            ureq::AgentBuilder::new()
                .timeout(Duration::from_millis(config.timeout_ms))
                .build()
        });
        Ok(Self {
            limiter: RateLimiter::per_minute(config.requests_per_minute),
            slots: Slots::new(config.max_in_flight),
            agent,
            config,
        })
    }

    pub fn replay(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        Self::new(GatewayConfig::replay(dir))
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    /// Returns the response as-is, including content-filter refusals.
    pub fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        req.validate()?;
        match self.config.backend {
            BackendKind::Replay => self.replay_lookup(&req.request_digest),
            BackendKind::Http => {
                let resp = self.http_complete(req)?;
                if self.config.record {
                    self.record_fixture(req, &resp)?;
                }
                Ok(resp)
            }
        }
    }

    /// Like [`Gateway::complete`] but surfaces content-filter refusals as
    /// [`GatewayError::Refusal`].
    pub fn complete_content(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let resp = self.complete(req)?;
        if resp.finish_reason == FinishReason::ContentFilter {
            return Err(GatewayError::Refusal);
        }
        Ok(resp)
    }

    pub fn fixture_path(&self, digest: &str) -> Option<PathBuf> {
        self.config
            .replay_dir
            .as_ref()
            .map(|d| d.join(format!("{}.json", digest.to_ascii_lowercase())))
    }

    /// Stores `resp` under the request digest; later replays of `req` return it.
    /// An existing fixture for the same digest is overwritten.
    pub fn record_fixture(&self, req: &ChatRequest, resp: &ChatResponse) -> Result<PathBuf, GatewayError> {
        let dir = self
            .config
            .replay_dir
            .as_ref()
            .ok_or_else(|| GatewayError::InvalidConfig("no replay_dir to record into".into()))?;
        write_fixture(dir, req, resp)
    }

    fn replay_lookup(&self, digest: &str) -> Result<ChatResponse, GatewayError> {
        let path = self.fixture_path(digest).expect("replay backend has a dir");
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(GatewayError::FixtureMissing(digest.to_string()))
            }
            Err(source) => return Err(GatewayError::IoFailure { path, source }),
        };
        let fixture: Fixture = serde_json::from_slice(&bytes)
            .map_err(|e| GatewayError::InvalidResponse(format!("{}: {e}", path.display())))?;
        Ok(fixture.response)
    }

    fn api_key(&self) -> Option<String> {
        std::env::var(&self.config.api_key_env_name)
            .ok()
            .filter(|k| !k.is_empty())
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}/{path}", self.config.base_url.trim_end_matches('/'))
    }

    /// POSTs `body` with retries. Only transport errors, 429 and 5xx are retried.
    fn post_json(&self, url: &str, body: &serde_json::Value) -> Result<serde_json::Value, GatewayError> {
        let agent = self.agent.as_ref().expect("http backend has an agent");
        let _slot = self.slots.acquire();
        let key = self.api_key();
        let mut attempt: u32 = 0;
        loop {
            self.limiter.acquire();
            let mut request = agent.post(url).set("Content-Type", "application/json");
            if let Some(k) = &key {
                request = request.set("Authorization", &format!("Bearer {k}"));
            }
            let outcome = match request.send_json(body.clone()) {
                Ok(resp) => match resp.into_json::<serde_json::Value>() {
                    Ok(v) => Attempt::Done(v),
                    Err(e) => Attempt::Fail(GatewayError::InvalidResponse(e.to_string())),
                },
                Err(ureq::Error::Status(code, resp)) => {
                    let body = resp.into_string().unwrap_or_default();
                    if code == 429 {
                        Attempt::Retry(GatewayError::RateLimited {
                            attempts: attempt + 1,
                        })
                    } else if code >= 500 {
                        Attempt::Retry(GatewayError::HttpStatus { code, body })
                    } else {
                        Attempt::Fail(GatewayError::HttpStatus { code, body })
                    }
                }
                Err(ureq::Error::Transport(t)) => Attempt::Retry(GatewayError::Transport(t.to_string())),
            };
            match outcome {
                Attempt::Done(v) => return Ok(v),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if attempt >= self.config.retry_max => return Err(e),
                Attempt::Retry(e) => {
                    let delay = self.config.retry_base_delay_ms.saturating_mul(1u64 << attempt.min(20));
                    log::warn!("retrying {url} after {delay} ms: {e}");
                    std::thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
            }
        }
    }

    fn http_complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let mut body = json!({
            "model": req.model_name,
            "messages": req.messages,
            "temperature": req.temperature,
        });
        if let Some(max) = req.max_tokens {
            body["max_tokens"] = json!(max);
        }
        let started = Instant::now();
        let value = self.post_json(&self.endpoint("chat/completions"), &body)?;
        let latency_ms = started.elapsed().as_millis() as u64;

        let choice = value
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| GatewayError::InvalidResponse("response has no choices".into()))?;
        let content = choice
            .pointer("/message/content")
            .and_then(|c| c.as_str())
            .unwrap_or("")
            .to_string();
        let finish_reason = FinishReason::from_wire(choice.get("finish_reason").and_then(|f| f.as_str()));
        if content.is_empty() && finish_reason != FinishReason::ContentFilter {
            return Err(GatewayError::InvalidResponse("empty completion".into()));
        }
        let usage = Usage {
            prompt_tokens: value.pointer("/usage/prompt_tokens").and_then(|v| v.as_u64()).unwrap_or(0),
            completion_tokens: value
                .pointer("/usage/completion_tokens")
                .and_then(|v| v.as_u64())
                .unwrap_or(0),
        };
        Ok(ChatResponse {
            content,
            finish_reason,
            usage,
            latency_ms,
        })
    }

    fn embedding_digest(&self, texts: &[String]) -> String {
        sha256_hex(
            serde_json::to_vec(&json!({"model": self.config.embedding_model, "input": texts}))
                .expect("serializes"),
        )
    }

    /// Embeds through the configured backend. Use [`fallback_embed`] for the
    /// offline hashed bag-of-words embedding.
    pub fn embed(&self, texts: &[String]) -> Result<EmbeddingBatch, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::EmptyInput);
        }
        let digest = self.embedding_digest(texts);
        let rows = match self.config.backend {
            BackendKind::Replay => {
                let path = self.fixture_path(&digest).expect("replay backend has a dir");
                let bytes = std::fs::read(&path).map_err(|_| GatewayError::FixtureMissing(digest.clone()))?;
                let fixture: EmbeddingFixture = serde_json::from_slice(&bytes)
                    .map_err(|e| GatewayError::InvalidResponse(e.to_string()))?;
                fixture.rows
            }
            BackendKind::Http => {
                let body = json!({"model": self.config.embedding_model, "input": texts});
                let value = self.post_json(&self.endpoint("embeddings"), &body)?;
                let rows = parse_embedding_response(&value, texts.len())?;
                if self.config.record {
                    let dir = self.config.replay_dir.as_ref().expect("validated");
                    let path = dir.join(format!("{digest}.json"));
                    let fixture = EmbeddingFixture {
                        model: self.config.embedding_model.clone(),
                        input: texts.to_vec(),
                        rows: rows.clone(),
                    };
                    write_json(&path, &fixture)?;
                }
                rows
            }
        };
        if rows.len() != texts.len() {
            return Err(GatewayError::InvalidResponse(format!(
                "{} embeddings for {} texts",
                rows.len(),
                texts.len()
            )));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(GatewayError::InvalidResponse("ragged embedding rows".into()));
        }
        let degenerate = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.iter().all(|x| *x == 0.0))
            .map(|(i, _)| i)
            .collect();
        Ok(EmbeddingBatch {
            rows,
            degenerate,
            provider: self.config.embedding_model.clone(),
        })
    }
}

fn parse_embedding_response(value: &serde_json::Value, n: usize) -> Result<Vec<Vec<f64>>, GatewayError> {
    let data = value
        .get("data")
        .and_then(|d| d.as_array())
        .ok_or_else(|| GatewayError::InvalidResponse("embedding response has no data".into()))?;
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; n];
    for (pos, item) in data.iter().enumerate() {
        let index = item.get("index").and_then(|i| i.as_u64()).map_or(pos, |i| i as usize);
        let vector = item
            .get("embedding")
            .and_then(|e| e.as_array())
            .ok_or_else(|| GatewayError::InvalidResponse("embedding item without vector".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| GatewayError::InvalidResponse("non-numeric embedding".into())))
            .collect::<Result<Vec<f64>, _>>()?;
        if index >= n {
            return Err(GatewayError::InvalidResponse(format!("embedding index {index} out of range")));
        }
        rows[index] = Some(vector);
    }
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or_else(|| GatewayError::InvalidResponse(format!("missing embedding {i}"))))
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), GatewayError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| GatewayError::IoFailure {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    let text = serde_json::to_string_pretty(value).expect("serializes") + "\n";
    std::fs::write(path, text).map_err(|source| GatewayError::IoFailure {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `<dir>/<digest>.json`. Usable without a gateway, e.g. when building
/// fixture sets.
pub fn write_fixture(dir: &Path, req: &ChatRequest, resp: &ChatResponse) -> Result<PathBuf, GatewayError> {
    let path = dir.join(format!("{}.json", req.request_digest.to_ascii_lowercase()));
    let fixture = Fixture {
        request: req.clone(),
        response: resp.clone(),
    };
    write_json(&path, &fixture)?;
    Ok(path)
}

/// Deterministic offline embedding: lowercased word tokens hashed into 256
/// buckets, then L2-normalised. Texts without tokens give a zero row and are
/// listed in `degenerate`.
pub fn fallback_embed(texts: &[String]) -> EmbeddingBatch {
    let mut rows = Vec::with_capacity(texts.len());
    let mut degenerate = Vec::new();
    for (i, text) in texts.iter().enumerate() {
        let mut row = vec![0.0; FALLBACK_EMBEDDING_DIM];
        for token in word_tokens(text) {
            row[(fnv1a64(token.as_bytes()) % FALLBACK_EMBEDDING_DIM as u64) as usize] += 1.0;
        }
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            degenerate.push(i);
        } else {
            row.iter_mut().for_each(|x| *x /= norm);
        }
        rows.push(row);
    }
    EmbeddingBatch {
        rows,
        degenerate,
        provider: FALLBACK_PROVIDER.to_string(),
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hello() -> ChatRequest {
        ChatRequest::user("gpt-4", "Hello", 0.0)
    }

    #[test]
    fn digest_matches_independent_script() {
        // python3: hashlib.sha256(json.dumps({"model":"gpt-4","messages":[{"role":"user",
        //   "content":"Hello"}],"temperature":0.0}, separators=(",",":")).encode()).hexdigest()
        assert_eq!(
            hello().request_digest,
            "ca172d99446dac6f3bd6489b7809e9d010f8a6e1603094af87e5ef5113f6b11d"
        );
    }

    #[test]
    fn digest_ignores_max_tokens_and_survives_reserialization() {
        let req = hello().with_max_tokens(64);
        assert_eq!(req.request_digest, hello().request_digest);
        let pretty = serde_json::to_string_pretty(&req).unwrap();
        let back: ChatRequest = serde_json::from_str(&pretty).unwrap();
        assert_eq!(
            ChatRequest::compute_digest(&back.model_name, &back.messages, back.temperature),
            req.request_digest
        );
        assert_ne!(ChatRequest::user("gpt-4", "Hello", 1.0).request_digest, req.request_digest);
    }

    #[test]
    fn replay_roundtrip_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::replay(dir.path()).unwrap();
        let req = hello();
        match gw.complete(&req) {
            Err(GatewayError::FixtureMissing(d)) => assert_eq!(d, req.request_digest),
            other => panic!("expected FixtureMissing, got {other:?}"),
        }
        let path = gw.record_fixture(&req, &ChatResponse::stop("first")).unwrap();
        assert_eq!(path.file_name().unwrap().to_str().unwrap(), format!("{}.json", req.request_digest));
        assert_eq!(gw.complete(&req).unwrap().content, "first");
        gw.record_fixture(&req, &ChatResponse::stop("second \u{1F600}")).unwrap();
        assert_eq!(gw.complete(&req).unwrap().content, "second \u{1F600}");
    }

    #[test]
    fn refusal_is_typed() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::replay(dir.path()).unwrap();
        let req = hello();
        let refusal = ChatResponse {
            content: String::new(),
            finish_reason: FinishReason::ContentFilter,
            usage: Usage::default(),
            latency_ms: 3,
        };
        gw.record_fixture(&req, &refusal).unwrap();
        assert_eq!(gw.complete(&req).unwrap(), refusal);
        assert!(matches!(gw.complete_content(&req), Err(GatewayError::Refusal)));
    }

    #[test]
    fn config_validation() {
        let cfg = GatewayConfig {
            backend: BackendKind::Replay,
            replay_dir: None,
            ..GatewayConfig::default()
        };
        assert!(matches!(Gateway::new(cfg), Err(GatewayError::InvalidConfig(_))));
        let cfg = GatewayConfig {
            max_in_flight: 0,
            ..GatewayConfig::default()
        };
        assert!(Gateway::new(cfg).is_err());
    }

    #[test]
    fn empty_messages_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::replay(dir.path()).unwrap();
        let req = ChatRequest::new("m", vec![], 0.0);
        assert!(matches!(gw.complete(&req), Err(GatewayError::InvalidConfig(_))));
    }

    #[test]
    fn fallback_embedding_properties() {
        let texts = vec!["same words here".to_string(), "same words here".to_string(), String::new()];
        let batch = fallback_embed(&texts);
        assert_eq!(batch.rows[0].len(), FALLBACK_EMBEDDING_DIM);
        assert_eq!(FALLBACK_EMBEDDING_DIM, 256);
        assert_eq!(batch.rows[0], batch.rows[1]);
        assert_eq!(batch.degenerate, vec![2]);
        assert!(batch.rows[2].iter().all(|x| *x == 0.0));
        let norm: f64 = batch.rows[0].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn replay_embeddings() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::replay(dir.path()).unwrap();
        let texts = vec!["a".to_string(), "b".to_string()];
        assert!(matches!(gw.embed(&texts), Err(GatewayError::FixtureMissing(_))));
        assert!(matches!(gw.embed(&[]), Err(GatewayError::EmptyInput)));
        let digest = gw.embedding_digest(&texts);
        write_json(
            &dir.path().join(format!("{digest}.json")),
            &EmbeddingFixture {
                model: gw.config.embedding_model.clone(),
                input: texts.clone(),
                rows: vec![vec![1.0, 0.0], vec![0.0, 0.0]],
            },
        )
        .unwrap();
        let batch = gw.embed(&texts).unwrap();
        assert_eq!(batch.rows.len(), 2);
        assert_eq!(batch.degenerate, vec![1]);
    }

    #[test]
    fn limiter_caps_window() {
        let limiter = RateLimiter::with_window(3, Duration::from_millis(200));
        let start = Instant::now();
        for _ in 0..3 {
            limiter.acquire();
        }
        assert!(start.elapsed() < Duration::from_millis(150));
        limiter.acquire();
        assert!(start.elapsed() >= Duration::from_millis(200));
    }
}
