use thiserror::Error;

use crate::types::Provenance;

/// Validation failures for the shared domain types.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("relevance score {0} is outside [-1, 1]")]
    ScoreOutOfRange(f64),
    #[error("invalid thresholds: need -1 <= lower ({lower}) < upper ({upper}) <= 1")]
    InvalidThresholds { upper: f64, lower: f64 },
    #[error("strip_top_n must be positive")]
    InvalidStripTopN,
    #[error("document text is empty after whitespace normalization")]
    EmptyDocument,
    #[error("question has no gold aliases")]
    NoGoldAliases,
    #[error("answer key {key:?} is not among choice labels {labels:?}")]
    UnknownAnswerKey { key: String, labels: Vec<String> },
    #[error("unknown question type {0:?}")]
    UnknownQuestionType(String),
    #[error("context provenance {0:?} does not match text emptiness")]
    ContextProvenanceMismatch(Provenance),
    #[error("cannot decide an action from an empty score list")]
    EmptyScores,
}
