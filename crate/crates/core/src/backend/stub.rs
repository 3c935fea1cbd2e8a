//! Deterministic in-process backends.
//!
//! The evaluator stub scores `2·J − 1`, where `J` is the Jaccard overlap of
//! the lowercased whitespace token sets of question and document.
//!
//! The generator stub reads the context block and question line of a prompt
//! built by [`crate::prompt::build_prompt`] and echoes the *last* context
//! sentence sharing at least one token with the question. Tokens for this
//! comparison are lowercased with leading/trailing non-alphanumeric
//! characters removed. Without a context block, or when nothing overlaps,
//! it answers [`UNKNOWN`].

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{BackendError, EvaluatorBackend, GeneratorBackend, SEP_TOKEN};
use crate::prompt::parse_prompt;
use crate::refine::split_sentences;
use crate::types::RelevanceScore;

pub const UNKNOWN: &str = "UNKNOWN";

/// Mask placeholder, mirrored from the attribution masker.
const MASK: &str = "...";

fn token_set(text: &str) -> HashSet<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

fn jaccard_score(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return -1.0;
    }
    let inter = a.intersection(b).count();
    2.0 * inter as f64 / union as f64 - 1.0
}

pub fn stub_score(question: &str, document: &str) -> RelevanceScore {
    let s = jaccard_score(&token_set(question), &token_set(document));
    // 2J - 1 lies in [-1, 1] for J in [0, 1].
    RelevanceScore::new(s.clamp(-1.0, 1.0)).expect("clamped")
}

/// Stub score of a masked `question [SEP] document` rendering.
///
/// Mask placeholders are ignored. A rendering without a `[SEP]` token, or
/// with no surviving tokens on either side, scores -1.
pub fn stub_score_text(rendered: &str) -> f64 {
    let tokens: Vec<&str> = rendered.split_whitespace().collect();
    let Some(sep) = tokens.iter().position(|t| *t == SEP_TOKEN) else {
        return -1.0;
    };
    let side = |ts: &[&str]| -> HashSet<String> {
        ts.iter()
            .filter(|t| **t != MASK)
            .map(|t| t.to_lowercase())
            .collect()
    };
    let q = side(&tokens[..sep]);
    let d = side(&tokens[sep + 1..]);
    if q.is_empty() || d.is_empty() {
        return -1.0;
    }
    jaccard_score(&q, &d)
}

fn content_tokens(text: &str) -> HashSet<String> {
    text.split_whitespace()
        .map(|t| {
            t.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

pub fn stub_generate(prompt: &str) -> String {
    let (context, question) = parse_prompt(prompt);
    let (Some(context), Some(question)) = (context, question) else {
        return UNKNOWN.to_string();
    };
    let wanted = content_tokens(question);
    split_sentences(context)
        .into_iter()
        .rev()
        .find(|s| !content_tokens(s).is_disjoint(&wanted))
        .unwrap_or_else(|| UNKNOWN.to_string())
}

/// Jaccard evaluator stub. Counts calls so tests can observe caching.
#[derive(Debug, Default)]
pub struct StubEvaluator {
    calls: AtomicUsize,
}

impl StubEvaluator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl EvaluatorBackend for StubEvaluator {
    fn score(&self, question: &str, document: &str) -> Result<RelevanceScore, BackendError> {
        if question.is_empty() {
            return Err(BackendError::EmptyInput("question"));
        }
        if document.is_empty() {
            return Err(BackendError::EmptyInput("document"));
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(stub_score(question, document))
    }
}

#[derive(Debug, Default)]
pub struct StubGenerator {
    calls: AtomicUsize,
}

impl StubGenerator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl GeneratorBackend for StubGenerator {
    fn generate(&self, prompt: &str) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(stub_generate(prompt))
    }
}
