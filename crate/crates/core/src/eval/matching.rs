//! String-match correctness.

use regex::Regex;

use crate::types::{normalize_whitespace, Choice, Gold};

fn normalize(text: &str) -> String {
    normalize_whitespace(&text.to_lowercase())
}

/// Lowercased, whitespace-collapsed alias with punctuation trimmed from
/// both ends.
fn normalize_alias(alias: &str) -> String {
    normalize(alias)
        .trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_string()
}

/// True iff some normalized alias occurs in the normalized prediction.
/// Aliases that normalize to nothing never match.
pub fn match_popqa(prediction: &str, gold_aliases: &[String]) -> bool {
    let pred = normalize(prediction);
    gold_aliases
        .iter()
        .map(|a| normalize_alias(a))
        .any(|a| !a.is_empty() && pred.contains(&a))
}

/// True iff the gold choice text occurs in the prediction (case-insensitive)
/// or the answer label appears as a standalone token in either case.
pub fn match_arc(prediction: &str, choices: &[Choice], answer_key: &str) -> bool {
    let Some(gold) = choices.iter().find(|c| c.label == answer_key) else {
        return false;
    };
    let text = normalize_alias(&gold.text);
    if !text.is_empty() && normalize(prediction).contains(&text) {
        return true;
    }
    let label = regex::escape(answer_key.trim());
    if label.is_empty() {
        return false;
    }
    Regex::new(&format!(r"(?i)\b{label}\b"))
        .map(|re| re.is_match(prediction))
        .unwrap_or(false)
}

pub fn is_correct(prediction: &str, gold: &Gold) -> bool {
    match gold {
        Gold::Aliases { aliases } => match_popqa(prediction, aliases),
        Gold::MultipleChoice {
            choices,
            answer_key,
        } => match_arc(prediction, choices, answer_key),
    }
}
