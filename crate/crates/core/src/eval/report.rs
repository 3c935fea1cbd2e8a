//! Aggregation of pipeline results: overall, per-action, per-question-type
//! and per-(type, action) accuracy.
//!
//! Counts are kept as exact integers; every percentage is rendered from the
//! exact ratio to one decimal, rounding half up.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::types::{ActionKind, PipelineResult, QuestionType};

/// `count / total` with its one-decimal percentage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub count: usize,
    pub total: usize,
    pub percent: f64,
}

/// Percentage of `count / total` rounded half up to one decimal; 0 when
/// `total` is 0.
pub fn percent_1dp(count: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let (c, t) = (count as u128, total as u128);
    let tenths = (2000 * c + t) / (2 * t);
    tenths as f64 / 10.0
}

impl Ratio {
    pub fn new(count: usize, total: usize) -> Self {
        Self {
            count,
            total,
            percent: percent_1dp(count, total),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionStats {
    pub count: usize,
    /// Fraction of non-errored questions that triggered this action.
    pub share: Ratio,
    pub accuracy: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QtypeStats {
    pub count: usize,
    pub accuracy: Ratio,
    pub dominant_action: Option<ActionKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QtypeActionCell {
    pub qtype: QuestionType,
    pub action: ActionKind,
    pub count: usize,
    pub accuracy: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub n: usize,
    pub errors: usize,
    pub overall_accuracy: Ratio,
    pub per_action: BTreeMap<ActionKind, ActionStats>,
    pub per_qtype: BTreeMap<QuestionType, QtypeStats>,
    pub per_qtype_action: Vec<QtypeActionCell>,
    pub wiki_hit_rate: Option<Ratio>,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    count: usize,
    correct: usize,
}

impl Tally {
    fn add(&mut self, correct: bool) {
        self.count += 1;
        self.correct += usize::from(correct);
    }

    fn accuracy(&self) -> Ratio {
        Ratio::new(self.correct, self.count)
    }
}

/// Most frequent action; ties prefer Correct, then Ambiguous, then
/// Incorrect.
fn dominant(counts: &BTreeMap<ActionKind, usize>) -> Option<ActionKind> {
    ActionKind::ALL
        .into_iter()
        .filter_map(|a| counts.get(&a).map(|&c| (a, c)))
        .filter(|&(_, c)| c > 0)
        .fold(
            None,
            |best: Option<(ActionKind, usize)>, (a, c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((a, c)),
            },
        )
        .map(|(a, _)| a)
}

pub fn aggregate(results: &[PipelineResult]) -> RunReport {
    let n = results.len();
    let scored: Vec<&PipelineResult> = results.iter().filter(|r| !r.is_errored()).collect();
    let errors = n - scored.len();

    let mut overall = Tally::default();
    let mut by_action: BTreeMap<ActionKind, Tally> = BTreeMap::new();
    let mut by_qtype: BTreeMap<QuestionType, Tally> = BTreeMap::new();
    let mut qtype_action_counts: BTreeMap<QuestionType, BTreeMap<ActionKind, usize>> =
        BTreeMap::new();
    let mut cells: BTreeMap<(QuestionType, ActionKind), Tally> = BTreeMap::new();
    let mut wiki = Tally::default();

    for r in &scored {
        overall.add(r.correct);
        by_qtype.entry(r.qtype).or_default().add(r.correct);
        if let Some(kind) = r.action_kind() {
            by_action.entry(kind).or_default().add(r.correct);
            *qtype_action_counts
                .entry(r.qtype)
                .or_default()
                .entry(kind)
                .or_default() += 1;
            cells.entry((r.qtype, kind)).or_default().add(r.correct);
        }
        if let Some(hit) = r.wiki_hit {
            wiki.add(hit);
        }
    }

    let per_action = by_action
        .into_iter()
        .map(|(kind, t)| {
            (
                kind,
                ActionStats {
                    count: t.count,
                    share: Ratio::new(t.count, scored.len()),
                    accuracy: t.accuracy(),
                },
            )
        })
        .collect();

    let per_qtype = by_qtype
        .into_iter()
        .map(|(qtype, t)| {
            let dominant_action = qtype_action_counts.get(&qtype).and_then(dominant);
            (
                qtype,
                QtypeStats {
                    count: t.count,
                    accuracy: t.accuracy(),
                    dominant_action,
                },
            )
        })
        .collect();

    let per_qtype_action = cells
        .into_iter()
        .map(|((qtype, action), t)| QtypeActionCell {
            qtype,
            action,
            count: t.count,
            accuracy: t.accuracy(),
        })
        .collect();

    RunReport {
        n,
        errors,
        overall_accuracy: overall.accuracy(),
        per_action,
        per_qtype,
        per_qtype_action,
        wiki_hit_rate: (wiki.count > 0).then(|| wiki.accuracy()),
    }
}

impl RunReport {
    /// Checks the count identities that hold for corrective runs: action
    /// counts plus errors equal `n`, shares cover every scored question, and
    /// per-action correct counts sum to the overall correct count.
    pub fn check_invariants(&self) -> Result<(), String> {
        let action_total: usize = self.per_action.values().map(|s| s.count).sum();
        if action_total + self.errors != self.n {
            return Err(format!(
                "action counts {action_total} + errors {} != n {}",
                self.errors, self.n
            ));
        }
        let share_total: usize = self.per_action.values().map(|s| s.share.count).sum();
        if share_total != self.overall_accuracy.total {
            return Err(format!(
                "shares cover {share_total} of {} scored questions",
                self.overall_accuracy.total
            ));
        }
        let correct: usize = self.per_action.values().map(|s| s.accuracy.count).sum();
        if correct != self.overall_accuracy.count {
            return Err(format!(
                "per-action correct {correct} != overall correct {}",
                self.overall_accuracy.count
            ));
        }
        Ok(())
    }

    /// Long-format (type, action) matrix.
    pub fn qtype_action_csv(&self) -> String {
        let mut out = String::from("qtype,action,count,correct,accuracy_percent\n");
        for c in &self.per_qtype_action {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.1}",
                c.qtype, c.action, c.count, c.accuracy.count, c.accuracy.percent
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Action, KnowledgeContext};
    use proptest::prelude::*;

    pub(crate) fn record(
        qtype: QuestionType,
        kind: Option<ActionKind>,
        correct: bool,
    ) -> PipelineResult {
        PipelineResult {
            question_id: String::new(),
            qtype,
            action: kind.map(|kind| Action {
                kind,
                doc_scores: vec![],
            }),
            context: KnowledgeContext::empty(),
            prediction: String::new(),
            correct,
            wiki_hit: None,
            error: None,
        }
    }

    #[test]
    fn rounding_is_half_up_on_exact_ratio() {
        assert_eq!(percent_1dp(1, 8), 12.5);
        assert_eq!(percent_1dp(1, 16), 6.3);
        assert_eq!(percent_1dp(2, 3), 66.7);
        assert_eq!(percent_1dp(0, 0), 0.0);
        assert_eq!(percent_1dp(5, 5), 100.0);
    }

    #[test]
    fn empty_results() {
        let r = aggregate(&[]);
        assert_eq!(r.n, 0);
        assert!(r.per_action.is_empty());
        assert!(r.check_invariants().is_ok());
    }

    #[test]
    fn all_correct() {
        let rs: Vec<_> = (0..4)
            .map(|_| record(QuestionType::Sport, Some(ActionKind::Correct), true))
            .collect();
        assert_eq!(aggregate(&rs).overall_accuracy.percent, 100.0);
    }

    #[test]
    fn errors_excluded_from_actions() {
        let mut bad = record(QuestionType::Other, Some(ActionKind::Correct), false);
        bad.error = Some("boom".into());
        let rs = vec![
            bad,
            record(QuestionType::Other, Some(ActionKind::Ambiguous), true),
        ];
        let r = aggregate(&rs);
        assert_eq!((r.n, r.errors), (2, 1));
        assert_eq!(r.per_action[&ActionKind::Ambiguous].share.percent, 100.0);
        assert!(!r.per_action.contains_key(&ActionKind::Correct));
        r.check_invariants().unwrap();
    }

    #[test]
    fn dominant_tie_prefers_correct_then_ambiguous() {
        let counts = BTreeMap::from([(ActionKind::Incorrect, 3), (ActionKind::Ambiguous, 3)]);
        assert_eq!(dominant(&counts), Some(ActionKind::Ambiguous));
        let counts = BTreeMap::from([
            (ActionKind::Incorrect, 3),
            (ActionKind::Ambiguous, 3),
            (ActionKind::Correct, 3),
        ]);
        assert_eq!(dominant(&counts), Some(ActionKind::Correct));
        assert_eq!(dominant(&BTreeMap::new()), None);
    }

    #[test]
    fn csv_rows() {
        let rs = vec![
            record(QuestionType::Author, Some(ActionKind::Incorrect), false),
            record(QuestionType::Author, Some(ActionKind::Correct), true),
        ];
        assert_eq!(
            aggregate(&rs).qtype_action_csv(),
            "qtype,action,count,correct,accuracy_percent\nauthor,correct,1,1,100.0\nauthor,incorrect,1,0,0.0\n"
        );
    }

    fn arb_record() -> impl Strategy<Value = PipelineResult> {
        (0usize..10, 0usize..3, any::<bool>(), any::<bool>()).prop_map(|(q, a, c, err)| {
            let mut r = record(QuestionType::ALL[q], Some(ActionKind::ALL[a]), c);
            if err && q == 0 {
                r.error = Some("e".into());
            }
            r
        })
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_consistent(
            mut rs in prop::collection::vec(arb_record(), 0..60),
            seed in any::<u64>(),
        ) {
            let a = aggregate(&rs);
            prop_assert!(a.check_invariants().is_ok());
            if !rs.is_empty() {
                let k = (seed as usize) % rs.len();
                rs.rotate_left(k);
                rs.reverse();
            }
            prop_assert_eq!(a, aggregate(&rs));
        }
    }
}
