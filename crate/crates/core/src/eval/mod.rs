//! Dataset ingestion, answer matching and result aggregation.

mod ingest;
mod io;
mod matching;
mod qtype;
mod report;

use crate::types::{PipelineResult, Question};

pub use ingest::{ingest, ingest_arc, ingest_popqa, ingest_reader, IngestError};
pub use io::{
    read_results, report_to_json, results_to_jsonl, write_report, write_report_csv, write_results,
};
pub use matching::{is_correct, match_arc, match_popqa};
pub use qtype::{classify_qtype, QtypeRule, QtypeRules};
pub use report::{
    aggregate, percent_1dp, ActionStats, QtypeActionCell, QtypeStats, Ratio, RunReport,
};

/// Recomputes `correct` for stored results against their questions.
/// Results whose question id is unknown are left unchanged.
pub fn rescore(results: &mut [PipelineResult], questions: &[Question]) -> usize {
    let by_id: std::collections::HashMap<&str, &Question> =
        questions.iter().map(|q| (q.id.as_str(), q)).collect();
    let mut changed = 0;
    for r in results.iter_mut() {
        if let Some(q) = by_id.get(r.question_id.as_str()) {
            let correct = !r.is_errored() && is_correct(&r.prediction, &q.gold);
            if correct != r.correct {
                changed += 1;
                r.correct = correct;
            }
        }
    }
    changed
}
