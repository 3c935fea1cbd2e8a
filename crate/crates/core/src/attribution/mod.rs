//! Black-box token attribution for evaluator scores.
//!
//! The input `question [SEP] document` is split on whitespace (the `[SEP]`
//! token is itself a player). A coalition is rendered by replacing every
//! absent token with `...`, collapsing adjacent placeholders, and the game
//! value of a coalition is the scorer's output on that rendering.
//!
//! Two estimators are provided: exact Shapley values by full coalition
//! enumeration ([`exact_shapley`], up to [`MAX_EXACT_TOKENS`] tokens) and a
//! hierarchical approximation over a midpoint binary partition of the
//! sequence ([`partition_shapley`]) whose cost is bounded by a call budget.

mod export;
mod partition;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, EvaluatorBackend, SEP_TOKEN};

pub use export::{attributions_csv, export_attributions, AttributionSample};
pub use partition::partition_shapley;

pub const MASK_TOKEN: &str = "...";
pub const MAX_EXACT_TOKENS: usize = 16;

#[derive(Debug, Error)]
pub enum AttributionError {
    #[error("{0} is empty")]
    EmptyInput(&'static str),
    #[error("exact attribution supports at most {max} tokens, got {n}")]
    TooManyTokens { n: usize, max: usize },
    #[error("scorer failed: {0}")]
    Scorer(#[from] BackendError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Partition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedInput {
    tokens: Vec<String>,
    /// Position of the `[SEP]` token.
    boundary_index: usize,
}

impl TokenizedInput {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn boundary_index(&self) -> usize {
        self.boundary_index
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Builds an input from arbitrary tokens, for games that are not
    /// question/document pairs. `boundary_index` is not validated.
    pub fn from_tokens(tokens: Vec<String>, boundary_index: usize) -> Self {
        Self {
            tokens,
            boundary_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub values: Vec<f64>,
    /// Score of the fully masked input.
    pub base_value: f64,
    /// Score of the unmasked input.
    pub full_value: f64,
    pub method: Method,
}

pub fn tokenize_for_masking(
    question: &str,
    document: &str,
) -> Result<TokenizedInput, AttributionError> {
    let q: Vec<String> = question.split_whitespace().map(str::to_string).collect();
    let d: Vec<String> = document.split_whitespace().map(str::to_string).collect();
    if q.is_empty() {
        return Err(AttributionError::EmptyInput("question"));
    }
    if d.is_empty() {
        return Err(AttributionError::EmptyInput("document"));
    }
    let boundary_index = q.len();
    let mut tokens = q;
    tokens.push(SEP_TOKEN.to_string());
    tokens.extend(d);
    Ok(TokenizedInput {
        tokens,
        boundary_index,
    })
}

/// Renders the coalition `keep` (one flag per token).
pub fn mask_render(input: &TokenizedInput, keep: &[bool]) -> String {
    debug_assert_eq!(keep.len(), input.tokens.len());
    let mut parts: Vec<&str> = Vec::with_capacity(input.tokens.len());
    for (token, &kept) in input.tokens.iter().zip(keep) {
        if kept {
            parts.push(token);
        } else if parts.last() != Some(&MASK_TOKEN) {
            parts.push(MASK_TOKEN);
        }
    }
    if parts.is_empty() {
        return MASK_TOKEN.to_string();
    }
    parts.join(" ")
}

/// Scores a masked rendering with an evaluator: the text is split at its
/// `[SEP]` token into question and document sides. Without a visible
/// `[SEP]` the whole rendering is the question side; an empty side is
/// passed as the mask placeholder.
pub fn score_rendering(
    evaluator: &dyn EvaluatorBackend,
    rendered: &str,
) -> Result<f64, BackendError> {
    let tokens: Vec<&str> = rendered.split_whitespace().collect();
    let (q, d) = match tokens.iter().position(|t| *t == SEP_TOKEN) {
        Some(i) => (tokens[..i].join(" "), tokens[i + 1..].join(" ")),
        None => (tokens.join(" "), String::new()),
    };
    let or_mask = |s: String| {
        if s.is_empty() {
            MASK_TOKEN.to_string()
        } else {
            s
        }
    };
    Ok(evaluator.score(&or_mask(q), &or_mask(d))?.value())
}

/// Shapley weights `|S|! (n-|S|-1)! / n!` indexed by `|S|`.
fn shapley_weights(n: usize) -> Vec<f64> {
    // w(s) = 1 / (n * C(n-1, s))
    (0..n)
        .map(|s| {
            let mut binom = 1.0f64;
            for k in 0..s {
                binom = binom * (n - 1 - k) as f64 / (k + 1) as f64;
            }
            1.0 / (n as f64 * binom)
        })
        .collect()
}

/// Shapley values of an `n`-player game given `v` for every coalition
/// bitmask (`v.len() == 1 << n`).
pub fn shapley_from_table(n: usize, v: &[f64]) -> Vec<f64> {
    assert_eq!(
        v.len(),
        1usize << n,
        "value table must cover all coalitions"
    );
    let w = shapley_weights(n);
    (0..n)
        .map(|i| {
            let bit = 1usize << i;
            (0..v.len())
                .filter(|mask| mask & bit == 0)
                .map(|mask| w[mask.count_ones() as usize] * (v[mask | bit] - v[mask]))
                .sum()
        })
        .collect()
}

pub fn exact_shapley<F>(
    input: &TokenizedInput,
    mut scorer: F,
) -> Result<Attribution, AttributionError>
where
    F: FnMut(&str) -> Result<f64, BackendError>,
{
    let n = input.len();
    if n > MAX_EXACT_TOKENS {
        return Err(AttributionError::TooManyTokens {
            n,
            max: MAX_EXACT_TOKENS,
        });
    }
    // Distinct coalitions can render identically (collapsed placeholders),
    // so renderings are memoized too.
    let mut by_text: HashMap<String, f64> = HashMap::new();
    let mut table = Vec::with_capacity(1 << n);
    for mask in 0..(1usize << n) {
        let keep: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
        let text = mask_render(input, &keep);
        let value = match by_text.get(&text) {
            Some(&v) => v,
            None => {
                let v = scorer(&text)?;
                by_text.insert(text, v);
                v
            }
        };
        table.push(value);
    }
    Ok(Attribution {
        values: shapley_from_table(n, &table),
        base_value: table[0],
        full_value: table[(1 << n) - 1],
        method: Method::Exact,
    })
}

/// Default call budget for [`partition_shapley`]: four calls per token.
pub fn default_budget(n_tokens: usize) -> usize {
    4 * n_tokens
}
