//! Decompose-then-recompose knowledge refinement.
//!
//! Documents are split into sentences, grouped into strips of three
//! consecutive sentences (a shorter tail strip is kept), and each strip is
//! scored against the question. Strips below the discard threshold are
//! dropped; the best `strip_top_n` survivors are joined, best first.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, EvaluatorBackend};
use crate::types::{Document, KnowledgeContext, Provenance, RelevanceScore, Thresholds};

pub const STRIP_SIZE: usize = 3;

/// Splits on `.`, `!` or `?` followed by whitespace or end of text.
/// No abbreviation handling. Segments are trimmed; empty ones dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let at_boundary = match chars.peek() {
            None => true,
            Some((_, next)) => next.is_whitespace(),
        };
        if at_boundary {
            let end = i + c.len_utf8();
            push_trimmed(&mut out, &text[start..end]);
            start = end;
        }
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed(out: &mut Vec<String>, segment: &str) {
    let s = segment.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

/// An unscored group of up to [`STRIP_SIZE`] consecutive sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strip {
    pub text: String,
    pub source_doc_index: usize,
    pub strip_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeStrip {
    pub text: String,
    pub score: RelevanceScore,
    pub source_doc_index: usize,
    pub strip_index: usize,
}

pub fn decompose(doc: &Document, doc_index: usize, strip_size: usize) -> Vec<Strip> {
    assert!(strip_size > 0, "strip size must be positive");
    split_sentences(doc.text())
        .chunks(strip_size)
        .enumerate()
        .map(|(strip_index, sentences)| Strip {
            text: sentences.join(" "),
            source_doc_index: doc_index,
            strip_index,
        })
        .collect()
}

fn strip_order(a: &KnowledgeStrip, b: &KnowledgeStrip) -> Ordering {
    b.score
        .value()
        .total_cmp(&a.score.value())
        .then(a.source_doc_index.cmp(&b.source_doc_index))
        .then(a.strip_index.cmp(&b.strip_index))
}

/// Scores every strip of `docs` and returns the retained strips in output
/// order.
pub fn select_strips(
    question: &str,
    docs: &[Document],
    evaluator: &dyn EvaluatorBackend,
    t: &Thresholds,
) -> Result<Vec<KnowledgeStrip>, BackendError> {
    let mut scored = Vec::new();
    for (doc_index, doc) in docs.iter().enumerate() {
        for strip in decompose(doc, doc_index, STRIP_SIZE) {
            let score = evaluator.score(question, &strip.text)?;
            if score.value() < t.strip_discard() {
                continue;
            }
            scored.push(KnowledgeStrip {
                text: strip.text,
                score,
                source_doc_index: strip.source_doc_index,
                strip_index: strip.strip_index,
            });
        }
    }
    scored.sort_by(strip_order);
    scored.truncate(t.strip_top_n());
    Ok(scored)
}

pub fn refine(
    question: &str,
    docs: &[Document],
    evaluator: &dyn EvaluatorBackend,
    t: &Thresholds,
) -> Result<KnowledgeContext, BackendError> {
    let strips = select_strips(question, docs, evaluator, t)?;
    let text = strips
        .iter()
        .map(|s| s.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    Ok(KnowledgeContext::or_empty(
        text,
        Provenance::RefinedInternal,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::StubEvaluator;
    use std::collections::HashMap;

    #[test]
    fn sentence_examples() {
        assert_eq!(split_sentences("A. B! C?"), vec!["A.", "B!", "C?"]);
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("   ").is_empty());
        assert_eq!(split_sentences("No terminator"), vec!["No terminator"]);
    }

    #[test]
    fn terminators_inside_tokens_do_not_split() {
        assert_eq!(
            split_sentences("Version 2.5 shipped. Dr.Who aired!! Then  done"),
            vec!["Version 2.5 shipped.", "Dr.Who aired!!", "Then  done"]
        );
        assert_eq!(
            split_sentences("Mr. Smith left."),
            vec!["Mr.", "Smith left."]
        );
    }

    fn doc_with(n: usize) -> Document {
        let text = (1..=n)
            .map(|i| format!("S{i}."))
            .collect::<Vec<_>>()
            .join(" ");
        Document::retrieved(if text.is_empty() { "x".into() } else { text }).unwrap()
    }

    #[test]
    fn decompose_keeps_remainder_strip() {
        let strips = decompose(&doc_with(7), 4, 3);
        let texts: Vec<_> = strips.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, vec!["S1. S2. S3.", "S4. S5. S6.", "S7."]);
        assert!(strips.iter().all(|s| s.source_doc_index == 4));
        assert_eq!(strips[2].strip_index, 2);
        assert_eq!(decompose(&doc_with(3), 0, 3).len(), 1);
    }

    #[test]
    fn decompose_without_terminated_sentences() {
        // A document always has at least one segment.
        assert_eq!(decompose(&Document::retrieved("x").unwrap(), 0, 3).len(), 1);
    }

    /// Evaluator returning fixed scores per strip text.
    struct Table(HashMap<&'static str, f64>);

    impl EvaluatorBackend for Table {
        fn score(&self, _q: &str, d: &str) -> Result<RelevanceScore, BackendError> {
            Ok(RelevanceScore::new(self.0[d]).unwrap())
        }
    }

    #[test]
    fn filter_sort_truncate() {
        // One document, three strips scored 0.9, -0.6, 0.1. The middle one
        // falls below -0.5; the rest come out best first.
        let doc = Document::retrieved("a1. a2. a3. b1. b2. b3. c1.").unwrap();
        let table = Table(HashMap::from([
            ("a1. a2. a3.", 0.1),
            ("b1. b2. b3.", -0.6),
            ("c1.", 0.9),
        ]));
        let ctx = refine("q", &[doc], &table, &Thresholds::POPQA).unwrap();
        assert_eq!(ctx.text(), "c1. a1. a2. a3.");
        assert_eq!(ctx.provenance(), Provenance::RefinedInternal);
    }

    #[test]
    fn discard_is_strict() {
        let doc = Document::retrieved("a. b. c. d.").unwrap();
        let table = Table(HashMap::from([("a. b. c.", -0.5), ("d.", -0.5000001)]));
        let ctx = refine("q", &[doc], &table, &Thresholds::POPQA).unwrap();
        assert_eq!(ctx.text(), "a. b. c.");
    }

    #[test]
    fn all_discarded_gives_empty_context() {
        let doc = Document::retrieved("zz yy. xx ww.").unwrap();
        let ctx = refine("a b", &[doc], &StubEvaluator::new(), &Thresholds::POPQA).unwrap();
        assert!(ctx.is_empty());
    }

    #[test]
    fn top_n_limits_and_ties_follow_position() {
        // Six single-sentence documents all scoring 1.0 under the stub.
        let docs: Vec<_> = (0..6).map(|_| Document::retrieved("q").unwrap()).collect();
        let strips = select_strips("q", &docs, &StubEvaluator::new(), &Thresholds::POPQA).unwrap();
        assert_eq!(strips.len(), 5);
        let order: Vec<_> = strips.iter().map(|s| s.source_doc_index).collect();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }
}
