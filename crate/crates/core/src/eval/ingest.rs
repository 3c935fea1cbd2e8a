//! JSON-lines dataset readers.
//!
//! PopQA lines: `{"id", "question", "answers": [str], "docs": [{"text", "title"}]}`.
//! ARC lines: `{"id", "question", "choices": [{"label", "text"}], "answerKey"}`
//! with an optional `docs` list of the same shape.
//!
//! Blank lines are skipped. Documents whose text is blank are dropped with
//! a warning; the rest keep their rank order.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use super::qtype::QtypeRules;
use crate::error::CoreError;
use crate::types::{Choice, DatasetMode, Document, DocumentSource, Gold, Question};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: CoreError,
    },
}

#[derive(Deserialize)]
struct RawDoc {
    #[serde(default)]
    text: String,
    #[serde(default)]
    title: Option<String>,
}

#[derive(Deserialize)]
struct RawPopqa {
    id: Value,
    question: String,
    answers: Vec<String>,
    #[serde(default)]
    docs: Vec<RawDoc>,
}

#[derive(Deserialize)]
struct RawArc {
    id: Value,
    question: String,
    choices: Vec<Choice>,
    #[serde(rename = "answerKey")]
    answer_key: String,
    #[serde(default)]
    docs: Vec<RawDoc>,
}

fn id_string(v: Value) -> String {
    match v {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

fn convert_docs(raw: Vec<RawDoc>, line: usize) -> Vec<Document> {
    raw.into_iter()
        .filter_map(|d| {
            match Document::new(d.text, DocumentSource::PrecomputedRetrieval, d.title) {
                Ok(doc) => Some(doc),
                Err(_) => {
                    log::warn!("line {line}: dropping blank document");
                    None
                }
            }
        })
        .collect()
}

fn parse_line(
    text: &str,
    line: usize,
    mode: DatasetMode,
    rules: &QtypeRules,
) -> Result<Question, IngestError> {
    let malformed = |e: serde_json::Error| IngestError::Malformed {
        line,
        message: e.to_string(),
    };
    let invalid = |source| IngestError::Invalid { line, source };
    let (id, question, gold, docs) = match mode {
        DatasetMode::Popqa => {
            let raw: RawPopqa = serde_json::from_str(text).map_err(malformed)?;
            let gold = Gold::aliases(raw.answers).map_err(invalid)?;
            (raw.id, raw.question, gold, raw.docs)
        }
        DatasetMode::Arc => {
            let raw: RawArc = serde_json::from_str(text).map_err(malformed)?;
            let gold = Gold::multiple_choice(raw.choices, raw.answer_key).map_err(invalid)?;
            (raw.id, raw.question, gold, raw.docs)
        }
    };
    Ok(Question {
        id: id_string(id),
        qtype: Some(rules.classify(&question)),
        text: question,
        gold,
        retrieved_docs: convert_docs(docs, line),
    })
}

pub fn ingest_reader(
    reader: impl Read,
    mode: DatasetMode,
    rules: &QtypeRules,
) -> Result<Vec<Question>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| IngestError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        out.push(parse_line(&text, line_no, mode, rules)?);
    }
    Ok(out)
}

pub fn ingest(
    path: &Path,
    mode: DatasetMode,
    rules: &QtypeRules,
) -> Result<Vec<Question>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ingest_reader(file, mode, rules)
}

pub fn ingest_popqa(path: &Path) -> Result<Vec<Question>, IngestError> {
    ingest(path, DatasetMode::Popqa, QtypeRules::bundled())
}

pub fn ingest_arc(path: &Path) -> Result<Vec<Question>, IngestError> {
    ingest(path, DatasetMode::Arc, QtypeRules::bundled())
}
