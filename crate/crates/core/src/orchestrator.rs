//! Per-question pipeline and the dataset runner.
//!
//! For each question the first `max_docs` retrieved documents are scored
//! and an action is chosen:
//!
//! * Correct: the context is the refined internal knowledge.
//! * Incorrect: documents are discarded; with web search enabled the
//!   context is the Wikipedia extract, otherwise empty.
//! * Ambiguous: refined internal knowledge, followed by the Wikipedia
//!   extract when web search is enabled and the lookup hits.
//!
//! A question without retrieved documents skips scoring and is handled as
//! Ambiguous with no internal knowledge.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, EvaluatorBackend, GeneratorBackend};
use crate::dispatch::decide_action;
use crate::eval::{aggregate, is_correct, RunReport};
use crate::prompt::build_prompt;
use crate::refine::refine;
use crate::types::{
    Action, ActionKind, DatasetMode, KnowledgeContext, PipelineResult, Provenance, Question,
    QuestionType, Thresholds,
};
use crate::wiki::{WikiClient, WikiResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Evaluator-driven corrective pipeline.
    #[default]
    Crag,
    /// Baseline: top-ranked retrieved document as context, no scoring.
    Vanilla,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub thresholds: Thresholds,
    /// Upper bound on scored documents per question (at least 1).
    pub max_docs: usize,
    pub dataset_mode: DatasetMode,
    pub enable_web_search: bool,
    pub workers: usize,
    pub method: Method,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::POPQA,
            max_docs: usize::MAX,
            dataset_mode: DatasetMode::Popqa,
            enable_web_search: false,
            workers: 1,
            method: Method::Crag,
        }
    }
}

/// Backends shared by every worker.
#[derive(Clone, Copy)]
pub struct Backends<'a> {
    pub evaluator: &'a dyn EvaluatorBackend,
    pub generator: &'a dyn GeneratorBackend,
    pub wiki: Option<&'a WikiClient>,
}

struct Routed {
    action: Option<Action>,
    context: KnowledgeContext,
    wiki_hit: Option<bool>,
}

fn lookup(q: &Question, wiki: Option<&WikiClient>) -> Option<WikiResult> {
    let client = wiki?;
    Some(
        client
            .fetch_for_question(&q.text)
            .unwrap_or_else(|e| WikiResult::miss(&q.text, Some(e.to_string()))),
    )
}

fn route(q: &Question, cfg: &PipelineConfig, b: Backends<'_>) -> Result<Routed, BackendError> {
    let docs = &q.retrieved_docs[..q.retrieved_docs.len().min(cfg.max_docs.max(1))];
    let web = if cfg.enable_web_search { b.wiki } else { None };

    if cfg.method == Method::Vanilla {
        let context = docs.first().map_or_else(KnowledgeContext::empty, |d| {
            KnowledgeContext::or_empty(d.text().to_string(), Provenance::Retrieved)
        });
        return Ok(Routed {
            action: None,
            context,
            wiki_hit: None,
        });
    }

    let action = if docs.is_empty() {
        Action {
            kind: ActionKind::Ambiguous,
            doc_scores: vec![],
        }
    } else {
        let scores = docs
            .iter()
            .map(|d| b.evaluator.score(&q.text, d.text()))
            .collect::<Result<Vec<_>, _>>()?;
        decide_action(&scores, &cfg.thresholds).expect("non-empty scores")
    };

    let (context, wiki_hit) = match action.kind {
        ActionKind::Correct => (refine(&q.text, docs, b.evaluator, &cfg.thresholds)?, None),
        ActionKind::Incorrect => match lookup(q, web) {
            Some(w) => {
                let ctx = if w.hit {
                    KnowledgeContext::or_empty(w.extract_text, Provenance::External)
                } else {
                    KnowledgeContext::empty()
                };
                (ctx, Some(w.hit))
            }
            None => (KnowledgeContext::empty(), None),
        },
        ActionKind::Ambiguous => {
            let internal = if docs.is_empty() {
                KnowledgeContext::empty()
            } else {
                refine(&q.text, docs, b.evaluator, &cfg.thresholds)?
            };
            match lookup(q, web) {
                Some(w) if w.hit => {
                    let ctx = if internal.is_empty() {
                        KnowledgeContext::or_empty(w.extract_text, Provenance::External)
                    } else {
                        KnowledgeContext::or_empty(
                            format!("{} {}", internal.text(), w.extract_text),
                            Provenance::Combined,
                        )
                    };
                    (ctx, Some(true))
                }
                Some(_) => (internal, Some(false)),
                None => (internal, None),
            }
        }
    };

    Ok(Routed {
        action: Some(action),
        context,
        wiki_hit,
    })
}

/// Runs one question end to end. Backend failures are recorded on the
/// result rather than returned.
pub fn run_question(q: &Question, cfg: &PipelineConfig, b: Backends<'_>) -> PipelineResult {
    let qtype = q.qtype.unwrap_or(QuestionType::Other);
    let outcome = route(q, cfg, b).and_then(|routed| {
        let prompt = build_prompt(q, &routed.context, cfg.dataset_mode);
        let prediction = b.generator.generate(&prompt)?;
        Ok((routed, prediction))
    });
    match outcome {
        Ok((routed, prediction)) => PipelineResult {
            question_id: q.id.clone(),
            qtype,
            correct: is_correct(&prediction, &q.gold),
            action: routed.action,
            context: routed.context,
            prediction,
            wiki_hit: routed.wiki_hit,
            error: None,
        },
        Err(e) => {
            log::warn!("question {} failed: {e}", q.id);
            PipelineResult {
                question_id: q.id.clone(),
                qtype,
                action: None,
                context: KnowledgeContext::empty(),
                prediction: String::new(),
                correct: false,
                wiki_hit: None,
                error: Some(e.to_string()),
            }
        }
    }
}

/// Processes questions on `cfg.workers` threads. Results are in input
/// order. Once `cancel` is set, workers finish their current question and
/// stop; unprocessed questions are absent from the results.
pub fn run_dataset_with_cancel(
    questions: &[Question],
    cfg: &PipelineConfig,
    b: Backends<'_>,
    cancel: &AtomicBool,
) -> (Vec<PipelineResult>, RunReport) {
    let slots: Vec<Mutex<Option<PipelineResult>>> =
        questions.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let workers = cfg.workers.max(1).min(questions.len().max(1));

    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if cancel.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(q) = questions.get(i) else { break };
                let r = run_question(q, cfg, b);
                *slots[i].lock().expect("result slot poisoned") = Some(r);
                let finished = done.fetch_add(1, Ordering::SeqCst) + 1;
                if finished.is_multiple_of(100) {
                    log::info!("{finished}/{} questions processed", questions.len());
                }
            });
        }
    });

    let results: Vec<PipelineResult> = slots
        .into_iter()
        .filter_map(|m| m.into_inner().expect("result slot poisoned"))
        .collect();
    let report = aggregate(&results);
    (results, report)
}

pub fn run_dataset(
    questions: &[Question],
    cfg: &PipelineConfig,
    b: Backends<'_>,
) -> (Vec<PipelineResult>, RunReport) {
    run_dataset_with_cancel(questions, cfg, b, &AtomicBool::new(false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{StubEvaluator, StubGenerator, UNKNOWN};
    use crate::types::{Document, Gold, RelevanceScore};
    use crate::wiki::mock::{MockWiki, WikiFixture};
    use crate::wiki::{TokenBucket, VirtualClock, WikiConfig};
    use std::sync::Arc;

    fn question(text: &str, docs: &[&str], aliases: &[&str]) -> Question {
        Question {
            id: "q1".into(),
            text: text.into(),
            gold: Gold::aliases(aliases.iter().map(|s| s.to_string()).collect()).unwrap(),
            retrieved_docs: docs
                .iter()
                .map(|d| Document::retrieved(*d).unwrap())
                .collect(),
            qtype: Some(QuestionType::Occupation),
        }
    }

    fn wiki_with(fixture: WikiFixture) -> (Arc<MockWiki>, WikiClient) {
        let mock = Arc::new(MockWiki::new(fixture));
        let limiter = Arc::new(TokenBucket::new(100.0, Box::new(VirtualClock::default())));
        let client = WikiClient::new(WikiConfig::default(), mock.clone(), limiter);
        (mock, client)
    }

    #[test]
    fn high_overlap_document_is_correct_and_refined() {
        let q = question(
            "what is henry feilden's occupation?",
            &["what is henry feilden's occupation?", "bananas are yellow."],
            &["occupation"],
        );
        let (e, g) = (StubEvaluator::new(), StubGenerator::new());
        let b = Backends {
            evaluator: &e,
            generator: &g,
            wiki: None,
        };
        let r = run_question(&q, &PipelineConfig::default(), b);
        let action = r.action.unwrap();
        assert_eq!(action.kind, ActionKind::Correct);
        assert_eq!(action.doc_scores[0], RelevanceScore::MAX);
        assert_eq!(r.context.provenance(), Provenance::RefinedInternal);
        // The second document's single strip scores -1 and is discarded.
        assert_eq!(r.context.text(), "what is henry feilden's occupation?");
        assert_eq!(r.prediction, "what is henry feilden's occupation?");
        assert!(r.correct);
    }

    #[test]
    fn zero_docs_without_web_search() {
        let q = question("What is X?", &[], &["chef"]);
        let (e, g) = (StubEvaluator::new(), StubGenerator::new());
        let b = Backends {
            evaluator: &e,
            generator: &g,
            wiki: None,
        };
        let r = run_question(&q, &PipelineConfig::default(), b);
        assert_eq!(r.context.provenance(), Provenance::Empty);
        assert_eq!(r.action.unwrap().kind, ActionKind::Ambiguous);
        assert_eq!(r.prediction, UNKNOWN);
        assert_eq!(e.calls(), 0);
    }

    #[test]
    fn incorrect_with_wiki_hit_uses_external() {
        let mut f = WikiFixture::default();
        f.page(
            "Henry Feilden",
            "Henry Feilden was a British Conservative politician.",
        );
        let (mock, client) = wiki_with(f);
        let q = question(
            "What is Henry Feilden's occupation?",
            &["Mitochondria power the cell."],
            &["politician"],
        );
        let (e, g) = (StubEvaluator::new(), StubGenerator::new());
        let b = Backends {
            evaluator: &e,
            generator: &g,
            wiki: Some(&client),
        };
        let cfg = PipelineConfig {
            enable_web_search: true,
            ..PipelineConfig::default()
        };
        let r = run_question(&q, &cfg, b);
        assert_eq!(r.action.as_ref().unwrap().kind, ActionKind::Incorrect);
        assert_eq!(r.context.provenance(), Provenance::External);
        assert_eq!(r.wiki_hit, Some(true));
        assert_eq!(
            r.prediction,
            "Henry Feilden was a British Conservative politician."
        );
        assert!(r.correct);
        assert_eq!(mock.call_count(), 1);
    }

    #[test]
    fn web_search_disabled_means_no_wiki_traffic() {
        let (mock, client) = wiki_with(WikiFixture::default());
        let q = question("What is Henry Feilden's occupation?", &["zz."], &["x"]);
        let (e, g) = (StubEvaluator::new(), StubGenerator::new());
        let b = Backends {
            evaluator: &e,
            generator: &g,
            wiki: Some(&client),
        };
        let r = run_question(&q, &PipelineConfig::default(), b);
        assert_eq!(r.wiki_hit, None);
        assert_eq!(mock.call_count(), 0);
    }

    #[test]
    fn ambiguous_combines_internal_then_external() {
        let mut f = WikiFixture::default();
        f.page("Ann Lee", "Ann Lee is a chef.");
        let (_, client) = wiki_with(f);
        // Score of the doc: {what, is, ann, lee's, occupation?} vs
        // {ann, lee, cooks, food.} share only "ann": 2 * 1/8 - 1 = -0.75.
        let q = question(
            "What is Ann Lee's occupation?",
            &["Ann Lee cooks food."],
            &["chef"],
        );
        let (e, g) = (StubEvaluator::new(), StubGenerator::new());
        let b = Backends {
            evaluator: &e,
            generator: &g,
            wiki: Some(&client),
        };
        let cfg = PipelineConfig {
            enable_web_search: true,
            thresholds: Thresholds::new(0.59, -0.99, -0.8, 5).unwrap(),
            ..PipelineConfig::default()
        };
        let r = run_question(&q, &cfg, b);
        assert_eq!(r.action.as_ref().unwrap().kind, ActionKind::Ambiguous);
        assert_eq!(r.context.provenance(), Provenance::Combined);
        assert_eq!(r.context.text(), "Ann Lee cooks food. Ann Lee is a chef.");
    }

    #[test]
    fn ambiguous_miss_falls_back_to_internal() {
        let (_, client) = wiki_with(WikiFixture::default());
        let q = question(
            "What is Ann Lee's occupation?",
            &["Ann Lee cooks food."],
            &["chef"],
        );
        let (e, g) = (StubEvaluator::new(), StubGenerator::new());
        let b = Backends {
            evaluator: &e,
            generator: &g,
            wiki: Some(&client),
        };
        let cfg = PipelineConfig {
            enable_web_search: true,
            thresholds: Thresholds::new(0.59, -0.99, -0.8, 5).unwrap(),
            ..PipelineConfig::default()
        };
        let r = run_question(&q, &cfg, b);
        assert_eq!(r.context.provenance(), Provenance::RefinedInternal);
        assert_eq!(r.wiki_hit, Some(false));
    }

    #[test]
    fn max_docs_limits_scoring() {
        let q = question("a b", &["a b.", "c d.", "e f."], &["x"]);
        let (e, g) = (StubEvaluator::new(), StubGenerator::new());
        let b = Backends {
            evaluator: &e,
            generator: &g,
            wiki: None,
        };
        let cfg = PipelineConfig {
            max_docs: 2,
            ..PipelineConfig::default()
        };
        let r = run_question(&q, &cfg, b);
        assert_eq!(r.action.unwrap().doc_scores.len(), 2);
    }

    #[test]
    fn vanilla_uses_top_document() {
        let q = question("What is X?", &["X is a chef.", "X is a cook."], &["chef"]);
        let (e, g) = (StubEvaluator::new(), StubGenerator::new());
        let b = Backends {
            evaluator: &e,
            generator: &g,
            wiki: None,
        };
        let cfg = PipelineConfig {
            method: Method::Vanilla,
            ..PipelineConfig::default()
        };
        let r = run_question(&q, &cfg, b);
        assert_eq!(r.action, None);
        assert_eq!(r.context.provenance(), Provenance::Retrieved);
        assert_eq!(r.prediction, "X is a chef.");
        assert_eq!(e.calls(), 0);
    }

    struct Failing;

    impl GeneratorBackend for Failing {
        fn generate(&self, _: &str) -> Result<String, BackendError> {
            Err(BackendError::Status {
                status: 500,
                body: "down".into(),
            })
        }
    }

    #[test]
    fn backend_failure_marks_question_errored() {
        let q = question("What is X?", &["X is a chef."], &["chef"]);
        let e = StubEvaluator::new();
        let b = Backends {
            evaluator: &e,
            generator: &Failing,
            wiki: None,
        };
        let (results, report) = run_dataset(&[q.clone(), q], &PipelineConfig::default(), b);
        assert!(results.iter().all(|r| r.is_errored()));
        assert_eq!((report.n, report.errors), (2, 2));
        report.check_invariants().unwrap();
    }

    #[test]
    fn empty_dataset() {
        let (e, g) = (StubEvaluator::new(), StubGenerator::new());
        let b = Backends {
            evaluator: &e,
            generator: &g,
            wiki: None,
        };
        let (results, report) = run_dataset(&[], &PipelineConfig::default(), b);
        assert!(results.is_empty());
        assert_eq!(report.n, 0);
    }

    #[test]
    fn cancelled_run_returns_nothing_new() {
        let q = question("What is X?", &["X is a chef."], &["chef"]);
        let (e, g) = (StubEvaluator::new(), StubGenerator::new());
        let b = Backends {
            evaluator: &e,
            generator: &g,
            wiki: None,
        };
        let cancel = AtomicBool::new(true);
        let (results, _) = run_dataset_with_cancel(&[q], &PipelineConfig::default(), b, &cancel);
        assert!(results.is_empty());
    }
}
