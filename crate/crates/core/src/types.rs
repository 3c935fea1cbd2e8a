//! Shared domain vocabulary: questions, documents, scores, thresholds, actions
//! and pipeline outputs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Tolerance for backend scores that drift just outside `[-1, 1]`.
pub const SCORE_CLAMP_TOLERANCE: f64 = 1e-6;

/// Collapses every run of whitespace to a single space and trims the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DocumentSource {
    PrecomputedRetrieval,
    Wikipedia,
}

/// A retrieved passage. The text is never blank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDocument")]
pub struct Document {
    text: String,
    source: DocumentSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    title: Option<String>,
}

#[derive(Deserialize)]
struct RawDocument {
    text: String,
    source: DocumentSource,
    #[serde(default)]
    title: Option<String>,
}

impl TryFrom<RawDocument> for Document {
    type Error = CoreError;

    fn try_from(raw: RawDocument) -> Result<Self, Self::Error> {
        Document::new(raw.text, raw.source, raw.title)
    }
}

impl Document {
    pub fn new(
        text: impl Into<String>,
        source: DocumentSource,
        title: Option<String>,
    ) -> Result<Self, CoreError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(CoreError::EmptyDocument);
        }
        Ok(Self {
            text,
            source,
            title,
        })
    }

    pub fn retrieved(text: impl Into<String>) -> Result<Self, CoreError> {
        Self::new(text, DocumentSource::PrecomputedRetrieval, None)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn source(&self) -> DocumentSource {
        self.source
    }

    pub fn title(&self) -> Option<&str> {
        self.title.as_deref()
    }
}

/// Which dataset family a run targets; selects gold format and prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DatasetMode {
    #[default]
    Popqa,
    Arc,
}

/// One labelled answer option of a multiple-choice question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub label: String,
    pub text: String,
}

/// Gold data; which variant is populated follows the dataset mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Gold {
    Aliases {
        aliases: Vec<String>,
    },
    MultipleChoice {
        choices: Vec<Choice>,
        answer_key: String,
    },
}

impl Gold {
    pub fn aliases(aliases: Vec<String>) -> Result<Self, CoreError> {
        if aliases.is_empty() {
            return Err(CoreError::NoGoldAliases);
        }
        Ok(Gold::Aliases { aliases })
    }

    pub fn multiple_choice(choices: Vec<Choice>, answer_key: String) -> Result<Self, CoreError> {
        if !choices.iter().any(|c| c.label == answer_key) {
            return Err(CoreError::UnknownAnswerKey {
                key: answer_key,
                labels: choices.iter().map(|c| c.label.clone()).collect(),
            });
        }
        Ok(Gold::MultipleChoice {
            choices,
            answer_key,
        })
    }

    /// Text of the gold choice for multiple-choice questions.
    pub fn answer_choice(&self) -> Option<&Choice> {
        match self {
            Gold::Aliases { .. } => None,
            Gold::MultipleChoice {
                choices,
                answer_key,
            } => choices.iter().find(|c| &c.label == answer_key),
        }
    }
}

/// Question categories used by the per-type breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionType {
    Occupation,
    Country,
    City,
    Sport,
    Author,
    Composer,
    Director,
    Genre,
    Religion,
    Other,
}

impl QuestionType {
    pub const ALL: [QuestionType; 10] = [
        QuestionType::Occupation,
        QuestionType::Country,
        QuestionType::City,
        QuestionType::Sport,
        QuestionType::Author,
        QuestionType::Composer,
        QuestionType::Director,
        QuestionType::Genre,
        QuestionType::Religion,
        QuestionType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::Occupation => "occupation",
            QuestionType::Country => "country",
            QuestionType::City => "city",
            QuestionType::Sport => "sport",
            QuestionType::Author => "author",
            QuestionType::Composer => "composer",
            QuestionType::Director => "director",
            QuestionType::Genre => "genre",
            QuestionType::Religion => "religion",
            QuestionType::Other => "other",
        }
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for QuestionType {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QuestionType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| CoreError::UnknownQuestionType(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub gold: Gold,
    /// In retriever rank order.
    #[serde(default)]
    pub retrieved_docs: Vec<Document>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qtype: Option<QuestionType>,
}

/// Evaluator relevance score, always within `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RelevanceScore(f64);

impl RelevanceScore {
    pub const MIN: RelevanceScore = RelevanceScore(-1.0);
    pub const MAX: RelevanceScore = RelevanceScore(1.0);

    /// Strict constructor: rejects anything outside `[-1, 1]` (and NaN).
    pub fn new(value: f64) -> Result<Self, CoreError> {
        if (-1.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(CoreError::ScoreOutOfRange(value))
        }
    }

    /// Lenient constructor for backend output: values within
    /// [`SCORE_CLAMP_TOLERANCE`] of the range are clamped onto it.
    pub fn from_backend(value: f64) -> Result<Self, CoreError> {
        if value.is_nan() {
            return Err(CoreError::ScoreOutOfRange(value));
        }
        if !(-1.0 - SCORE_CLAMP_TOLERANCE..=1.0 + SCORE_CLAMP_TOLERANCE).contains(&value) {
            return Err(CoreError::ScoreOutOfRange(value));
        }
        Ok(Self(value.clamp(-1.0, 1.0)))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for RelevanceScore {
    type Error = CoreError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        RelevanceScore::new(value)
    }
}

impl From<RelevanceScore> for f64 {
    fn from(score: RelevanceScore) -> f64 {
        score.0
    }
}

impl fmt::Display for RelevanceScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dispatch and refinement thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawThresholds")]
pub struct Thresholds {
    upper: f64,
    lower: f64,
    strip_discard: f64,
    strip_top_n: usize,
}

#[derive(Deserialize)]
struct RawThresholds {
    upper: f64,
    lower: f64,
    strip_discard: f64,
    strip_top_n: usize,
}

impl TryFrom<RawThresholds> for Thresholds {
    type Error = CoreError;

    fn try_from(raw: RawThresholds) -> Result<Self, Self::Error> {
        Thresholds::new(raw.upper, raw.lower, raw.strip_discard, raw.strip_top_n)
    }
}

impl Thresholds {
    /// PopQA settings: upper 0.59, lower -0.99, strips below -0.5
    /// discarded, top 5 strips kept.
    pub const POPQA: Thresholds = Thresholds {
        upper: 0.59,
        lower: -0.99,
        strip_discard: -0.5,
        strip_top_n: 5,
    };

    pub fn new(
        upper: f64,
        lower: f64,
        strip_discard: f64,
        strip_top_n: usize,
    ) -> Result<Self, CoreError> {
        let in_range = |v: f64| (-1.0..=1.0).contains(&v);
        if !(in_range(upper) && in_range(lower) && lower < upper) {
            return Err(CoreError::InvalidThresholds { upper, lower });
        }
        if strip_top_n == 0 {
            return Err(CoreError::InvalidStripTopN);
        }
        Ok(Self {
            upper,
            lower,
            strip_discard,
            strip_top_n,
        })
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn strip_discard(&self) -> f64 {
        self.strip_discard
    }

    pub fn strip_top_n(&self) -> usize {
        self.strip_top_n
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self::POPQA
    }
}

/// The three corrective actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Correct,
    Incorrect,
    Ambiguous,
}

impl ActionKind {
    pub const ALL: [ActionKind; 3] = [
        ActionKind::Correct,
        ActionKind::Ambiguous,
        ActionKind::Incorrect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Correct => "correct",
            ActionKind::Incorrect => "incorrect",
            ActionKind::Ambiguous => "ambiguous",
        }
    }

    /// Rank under the max-score order: Incorrect < Ambiguous < Correct.
    pub fn rank(self) -> u8 {
        match self {
            ActionKind::Incorrect => 0,
            ActionKind::Ambiguous => 1,
            ActionKind::Correct => 2,
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    /// Aligned with the scored documents. Empty when no documents were
    /// available and dispatch was bypassed.
    pub doc_scores: Vec<RelevanceScore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    RefinedInternal,
    External,
    Combined,
    /// Unrefined top-ranked retrieval, used only by the vanilla baseline.
    Retrieved,
    Empty,
}

/// The context string handed to the generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawContext")]
pub struct KnowledgeContext {
    text: String,
    provenance: Provenance,
}

#[derive(Deserialize)]
struct RawContext {
    text: String,
    provenance: Provenance,
}

impl TryFrom<RawContext> for KnowledgeContext {
    type Error = CoreError;

    fn try_from(raw: RawContext) -> Result<Self, Self::Error> {
        KnowledgeContext::new(raw.text, raw.provenance)
    }
}

impl KnowledgeContext {
    pub fn new(text: impl Into<String>, provenance: Provenance) -> Result<Self, CoreError> {
        let text = text.into();
        if text.is_empty() != (provenance == Provenance::Empty) {
            return Err(CoreError::ContextProvenanceMismatch(provenance));
        }
        Ok(Self { text, provenance })
    }

    pub fn empty() -> Self {
        Self {
            text: String::new(),
            provenance: Provenance::Empty,
        }
    }

    /// Builds a context, falling back to [`KnowledgeContext::empty`] for
    /// empty text.
    pub fn or_empty(text: String, provenance: Provenance) -> Self {
        if text.is_empty() {
            Self::empty()
        } else {
            Self { text, provenance }
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn is_empty(&self) -> bool {
        self.provenance == Provenance::Empty
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub question_id: String,
    pub qtype: QuestionType,
    /// `None` for the vanilla baseline and for questions that failed before
    /// dispatch.
    pub action: Option<Action>,
    pub context: KnowledgeContext,
    pub prediction: String,
    pub correct: bool,
    pub wiki_hit: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PipelineResult {
    pub fn is_errored(&self) -> bool {
        self.error.is_some()
    }

    pub fn action_kind(&self) -> Option<ActionKind> {
        self.action.as_ref().map(|a| a.kind)
    }
}
