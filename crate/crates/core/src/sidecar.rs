//! Client for the sequence-classifier sidecar.
//!
//! The sidecar is a separate HTTP service wrapping a fine-tuned encoder
//! checkpoint. Its wire contract:
//!
//! - `POST /classify` with `{"text": "..."}` → `{"label": "fake"|"true", "score": p, "truncated": bool}`;
//!   400 for empty text, 503 while the model is not loaded.
//! - `GET /health` → `{"status", "mode", "model_name"}`; 503 before load.
//!
//! In `stub` mode the service labels text by the parity of the first byte of
//! its SHA-256 digest (even → fake) with score 0.9. [`stub_label`] is that
//! rule, so tests can predict stub output exactly.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::digest::sha256_hex;

/// Word budget applied before text is sent to the classifier.
pub const INPUT_WORD_LIMIT: usize = 500;

#[derive(Debug, Error)]
pub enum SidecarError {
    #[error("sidecar rejected empty text")]
    EmptyText,
    #[error("sidecar model not loaded")]
    NotReady,
    #[error("sidecar HTTP status {code}: {body}")]
    HttpStatus { code: u16, body: String },
    #[error("sidecar transport error: {0}")]
    Transport(String),
    #[error("invalid sidecar response: {0}")]
    InvalidResponse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SidecarLabel {
    Fake,
    True,
}

impl From<SidecarLabel> for Label {
    fn from(l: SidecarLabel) -> Self {
        match l {
            SidecarLabel::Fake => Label::Fake,
            SidecarLabel::True => Label::True,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub label: SidecarLabel,
    pub score: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthStatus {
    pub status: String,
    pub mode: String,
    pub model_name: String,
}

/// The stub-mode labelling rule.
pub fn stub_label(text: &str) -> SidecarLabel {
    let digest = sha256_hex(text);
    let first = u8::from_str_radix(&digest[..2], 16).expect("hex digest");
    if first % 2 == 0 {
        SidecarLabel::Fake
    } else {
        SidecarLabel::True
    }
}

#[derive(Debug, Clone)]
pub struct SidecarClient {
    base_url: String,
    agent: ureq::Agent,
}

impl SidecarClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).build(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn classify(&self, text: &str) -> Result<ClassifyResponse, SidecarError> {
        let result = self
            .agent
            .post(&format!("{}/classify", self.base_url))
            .send_json(ClassifyRequest { text: text.to_string() });
        let resp: ClassifyResponse = read_json(result)?;
        if !(0.0..=1.0).contains(&resp.score) {
            return Err(SidecarError::InvalidResponse(format!("score {} outside [0, 1]", resp.score)));
        }
        Ok(resp)
    }

    pub fn health(&self) -> Result<HealthStatus, SidecarError> {
        read_json(self.agent.get(&format!("{}/health", self.base_url)).call())
    }
}

fn read_json<T: serde::de::DeserializeOwned>(result: Result<ureq::Response, ureq::Error>) -> Result<T, SidecarError> {
    match result {
        Ok(resp) => resp.into_json().map_err(|e| SidecarError::InvalidResponse(e.to_string())),
        Err(ureq::Error::Status(400, _)) => Err(SidecarError::EmptyText),
        Err(ureq::Error::Status(503, _)) => Err(SidecarError::NotReady),
        Err(ureq::Error::Status(code, resp)) => Err(SidecarError::HttpStatus {
            code,
            body: resp.into_string().unwrap_or_default(),
        }),
        Err(ureq::Error::Transport(t)) => Err(SidecarError::Transport(t.to_string())),
    }
}
