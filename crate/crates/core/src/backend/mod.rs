//! Client interface to the relevance evaluator and the answer generator.
//!
//! Two implementations exist for each: deterministic in-process stubs
//! ([`StubEvaluator`], [`StubGenerator`]) and JSON-over-HTTP clients
//! ([`HttpEvaluator`], [`HttpGenerator`]). [`CachedEvaluator`] wraps any
//! evaluator so that each distinct input is scored at most once per run.

mod cache;
mod http;
mod stub;

use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::retry::RetryPolicy;
use crate::types::RelevanceScore;

pub use cache::CachedEvaluator;
pub use http::{
    GenerateRequest, GenerateResponse, HttpEvaluator, HttpGenerator, ScoreRequest, ScoreResponse,
};
pub use stub::{stub_generate, stub_score, stub_score_text, StubEvaluator, StubGenerator, UNKNOWN};

pub const SEP_TOKEN: &str = "[SEP]";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("empty {0}")]
    EmptyInput(&'static str),
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("score {0} is outside [-1, 1]")]
    ScoreOutOfRange(f64),
    #[error("generator returned empty text")]
    EmptyGeneration,
}

pub trait EvaluatorBackend: Send + Sync {
    fn score(&self, question: &str, document: &str) -> Result<RelevanceScore, BackendError>;
}

pub trait GeneratorBackend: Send + Sync {
    fn generate(&self, prompt: &str) -> Result<String, BackendError>;
}

impl<T: EvaluatorBackend + ?Sized> EvaluatorBackend for Arc<T> {
    fn score(&self, question: &str, document: &str) -> Result<RelevanceScore, BackendError> {
        (**self).score(question, document)
    }
}

impl<T: EvaluatorBackend + ?Sized> EvaluatorBackend for &T {
    fn score(&self, question: &str, document: &str) -> Result<RelevanceScore, BackendError> {
        (**self).score(question, document)
    }
}

impl<T: EvaluatorBackend + ?Sized> EvaluatorBackend for Box<T> {
    fn score(&self, question: &str, document: &str) -> Result<RelevanceScore, BackendError> {
        (**self).score(question, document)
    }
}

impl<T: GeneratorBackend + ?Sized> GeneratorBackend for Arc<T> {
    fn generate(&self, prompt: &str) -> Result<String, BackendError> {
        (**self).generate(prompt)
    }
}

impl<T: GeneratorBackend + ?Sized> GeneratorBackend for &T {
    fn generate(&self, prompt: &str) -> Result<String, BackendError> {
        (**self).generate(prompt)
    }
}

impl<T: GeneratorBackend + ?Sized> GeneratorBackend for Box<T> {
    fn generate(&self, prompt: &str) -> Result<String, BackendError> {
        (**self).generate(prompt)
    }
}

/// Evaluator input: `question [SEP] document`.
pub fn format_evaluator_input(question: &str, document: &str) -> Result<String, BackendError> {
    if question.is_empty() {
        return Err(BackendError::EmptyInput("question"));
    }
    if document.is_empty() {
        return Err(BackendError::EmptyInput("document"));
    }
    Ok(format!("{question} {SEP_TOKEN} {document}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    /// Base URL; `/score` or `/generate` is appended.
    pub endpoint: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub cache_dir: Option<std::path::PathBuf>,
}

impl BackendConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            backoff_base: Duration::from_millis(200),
            cache_dir: None,
        }
    }

    pub(crate) fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base_delay: self.backoff_base,
            max_delay: self.backoff_base.saturating_mul(16),
        }
    }

    pub(crate) fn url(&self, path: &str) -> String {
        format!("{}{}", self.endpoint.trim_end_matches('/'), path)
    }
}
