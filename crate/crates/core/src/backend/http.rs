//! JSON-over-HTTP backends.
//!
//! ```text
//! POST /score     {"question": str, "document": str}  -> {"score": float}
//! POST /generate  {"prompt": str, "max_tokens": int}  -> {"text": str}
//! ```
//!
//! Timeouts, connection failures and 5xx responses are retried with
//! exponential backoff; 4xx responses are returned immediately.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{BackendConfig, BackendError, EvaluatorBackend, GeneratorBackend};
use crate::retry::Attempt;
use crate::types::RelevanceScore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub question: String,
    pub document: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub text: String,
}

fn agent(cfg: &BackendConfig) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(cfg.timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

fn post_once<B: Serialize, R: DeserializeOwned>(
    agent: &ureq::Agent,
    url: &str,
    body: &B,
) -> Attempt<R, BackendError> {
    let mut resp = match agent.post(url).send_json(body) {
        Ok(resp) => resp,
        Err(ureq::Error::Timeout(t)) => {
            return Attempt::Transient(BackendError::Timeout(t.to_string()))
        }
        Err(
            e @ (ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound),
        ) => return Attempt::Transient(BackendError::Transport(e.to_string())),
        Err(e) => return Attempt::Fatal(BackendError::Transport(e.to_string())),
    };
    let status = resp.status().as_u16();
    if status >= 400 {
        let body = resp.body_mut().read_to_string().unwrap_or_default();
        let err = BackendError::Status { status, body };
        return if status >= 500 {
            Attempt::Transient(err)
        } else {
            Attempt::Fatal(err)
        };
    }
    match resp.body_mut().read_json::<R>() {
        Ok(v) => Attempt::Done(v),
        Err(ureq::Error::Timeout(t)) => Attempt::Transient(BackendError::Timeout(t.to_string())),
        Err(e) => Attempt::Fatal(BackendError::MalformedResponse(e.to_string())),
    }
}

fn post_with_retry<B: Serialize, R: DeserializeOwned>(
    cfg: &BackendConfig,
    agent: &ureq::Agent,
    path: &str,
    body: &B,
) -> Result<R, BackendError> {
    let url = cfg.url(path);
    cfg.retry_policy().run(|_| post_once(agent, &url, body))
}

#[derive(Debug)]
pub struct HttpEvaluator {
    cfg: BackendConfig,
    agent: ureq::Agent,
}

impl HttpEvaluator {
    pub fn new(cfg: BackendConfig) -> Self {
        let agent = agent(&cfg);
        Self { cfg, agent }
    }

    pub fn config(&self) -> &BackendConfig {
        &self.cfg
    }
}

impl EvaluatorBackend for HttpEvaluator {
    fn score(&self, question: &str, document: &str) -> Result<RelevanceScore, BackendError> {
        if question.is_empty() {
            return Err(BackendError::EmptyInput("question"));
        }
        if document.is_empty() {
            return Err(BackendError::EmptyInput("document"));
        }
        let req = ScoreRequest {
            question: question.to_string(),
            document: document.to_string(),
        };
        let resp: ScoreResponse = post_with_retry(&self.cfg, &self.agent, "/score", &req)?;
        RelevanceScore::from_backend(resp.score)
            .map_err(|_| BackendError::ScoreOutOfRange(resp.score))
    }
}

#[derive(Debug)]
pub struct HttpGenerator {
    cfg: BackendConfig,
    agent: ureq::Agent,
    max_tokens: u32,
}

impl HttpGenerator {
    pub const DEFAULT_MAX_TOKENS: u32 = 64;

    pub fn new(cfg: BackendConfig) -> Self {
        let agent = agent(&cfg);
        Self {
            cfg,
            agent,
            max_tokens: Self::DEFAULT_MAX_TOKENS,
        }
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }
}

impl GeneratorBackend for HttpGenerator {
    fn generate(&self, prompt: &str) -> Result<String, BackendError> {
        let req = GenerateRequest {
            prompt: prompt.to_string(),
            max_tokens: self.max_tokens,
        };
        let resp: GenerateResponse = post_with_retry(&self.cfg, &self.agent, "/generate", &req)?;
        if resp.text.trim().is_empty() {
            return Err(BackendError::EmptyGeneration);
        }
        Ok(resp.text)
    }
}
