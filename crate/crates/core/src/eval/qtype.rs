//! Keyword rules assigning questions to categories.
//!
//! The rule table is data: the default ships as `data/qtype_keywords.json`
//! and a replacement can be loaded at runtime. Rules are tried in order;
//! the first rule with a keyword occurring in the lowercased question wins.
//! The question's entity span (when a template recognises one) is removed
//! first, so entity names such as "Country Girl" cannot trigger a rule.

use std::path::Path;

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

use crate::types::{normalize_whitespace, QuestionType};
use crate::wiki::extract_entity;

const DEFAULT_RULES_JSON: &str = include_str!("../../data/qtype_keywords.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QtypeRule {
    pub category: QuestionType,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QtypeRules {
    pub rules: Vec<QtypeRule>,
}

static DEFAULT_RULES: Lazy<QtypeRules> =
    Lazy::new(|| serde_json::from_str(DEFAULT_RULES_JSON).expect("bundled qtype rules parse"));

impl QtypeRules {
    pub fn bundled() -> &'static QtypeRules {
        &DEFAULT_RULES
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn classify(&self, question: &str) -> QuestionType {
        let mut text = normalize_whitespace(question);
        if let Some(entity) = extract_entity(&text) {
            text = text.replacen(&entity, " ", 1);
        }
        let text = text.to_lowercase();
        self.rules
            .iter()
            .find(|r| r.keywords.iter().any(|k| text.contains(&k.to_lowercase())))
            .map_or(QuestionType::Other, |r| r.category)
    }
}

/// Classifies with the bundled rule table.
pub fn classify_qtype(question: &str) -> QuestionType {
    QtypeRules::bundled().classify(question)
}
