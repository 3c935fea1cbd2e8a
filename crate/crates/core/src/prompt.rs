//! Generator prompt template.
//!
//! The layout is fixed byte for byte (`\n` line endings, no trailing newline):
//!
//! ```text
//! Answer the question using the context if it is helpful. Respond with a concise one-to-two sentence answer.
//! Answer with the letter and the text of the correct choice.      <- arc mode only
//!
//! Context:                                                        <- omitted when
//! <context text>                                                  <- the context
//!                                                                 <- is empty
//! Question: <question text>
//! Choices:                                                        <- arc mode only
//! A) <choice text>                                                <- one line per choice
//! Answer:
//! ```

use crate::types::{DatasetMode, Gold, KnowledgeContext, Question};

pub const INSTRUCTION_LINE: &str = "Answer the question using the context if it is helpful. \
Respond with a concise one-to-two sentence answer.";
pub const CHOICE_INSTRUCTION_LINE: &str =
    "Answer with the letter and the text of the correct choice.";
pub const CONTEXT_HEADER: &str = "Context:";
pub const QUESTION_PREFIX: &str = "Question: ";
pub const CHOICES_HEADER: &str = "Choices:";
pub const ANSWER_CUE: &str = "Answer:";

pub fn build_prompt(question: &Question, context: &KnowledgeContext, mode: DatasetMode) -> String {
    let mut out = String::from(INSTRUCTION_LINE);
    if mode == DatasetMode::Arc {
        out.push('\n');
        out.push_str(CHOICE_INSTRUCTION_LINE);
    }
    out.push_str("\n\n");
    if !context.is_empty() {
        out.push_str(CONTEXT_HEADER);
        out.push('\n');
        out.push_str(context.text());
        out.push_str("\n\n");
    }
    out.push_str(QUESTION_PREFIX);
    out.push_str(&question.text);
    out.push('\n');
    if mode == DatasetMode::Arc {
        if let Gold::MultipleChoice { choices, .. } = &question.gold {
            out.push_str(CHOICES_HEADER);
            out.push('\n');
            for c in choices {
                out.push_str(&format!("{}) {}\n", c.label, c.text));
            }
        }
    }
    out.push_str(ANSWER_CUE);
    out
}

/// Splits a prompt built by [`build_prompt`] back into (context, question).
/// Context is `None` when the block is absent.
pub fn parse_prompt(prompt: &str) -> (Option<&str>, Option<&str>) {
    let context_marker = format!("\n\n{CONTEXT_HEADER}\n");
    let question_marker = format!("\n\n{QUESTION_PREFIX}");
    let (context, rest) = match prompt.find(&context_marker) {
        Some(start) => {
            let body = &prompt[start + context_marker.len()..];
            match body.rfind(&question_marker) {
                Some(end) => (Some(&body[..end]), &body[end..]),
                None => (Some(body), ""),
            }
        }
        None => (None, prompt),
    };
    let question = rest
        .lines()
        .find_map(|line| line.strip_prefix(QUESTION_PREFIX));
    (context, question)
}
