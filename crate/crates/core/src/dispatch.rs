//! Maps per-document relevance scores to a corrective action.

use crate::error::CoreError;
use crate::types::{Action, ActionKind, RelevanceScore, Thresholds};

/// Chooses the action for a non-empty list of document scores.
///
/// Correct when the best score is strictly above `upper`, Incorrect when it
/// is strictly below `lower` (i.e. every score is), Ambiguous otherwise.
/// A best score exactly equal to either threshold is Ambiguous.
pub fn decide_action(scores: &[RelevanceScore], t: &Thresholds) -> Result<Action, CoreError> {
    let best = scores
        .iter()
        .map(|s| s.value())
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |m| m.max(v)))
        })
        .ok_or(CoreError::EmptyScores)?;

    let kind = if best > t.upper() {
        ActionKind::Correct
    } else if best < t.lower() {
        ActionKind::Incorrect
    } else {
        ActionKind::Ambiguous
    };
    Ok(Action {
        kind,
        doc_scores: scores.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scores(values: &[f64]) -> Vec<RelevanceScore> {
        values
            .iter()
            .map(|&v| RelevanceScore::new(v).unwrap())
            .collect()
    }

    fn kind(values: &[f64]) -> ActionKind {
        decide_action(&scores(values), &Thresholds::POPQA)
            .unwrap()
            .kind
    }

    #[test]
    fn popqa_thresholds() {
        assert_eq!(kind(&[0.70, -0.20]), ActionKind::Correct);
        assert_eq!(kind(&[-0.995, -1.0]), ActionKind::Incorrect);
        assert_eq!(kind(&[0.59]), ActionKind::Ambiguous);
        assert_eq!(kind(&[-0.99]), ActionKind::Ambiguous);
    }

    #[test]
    fn some_below_lower_none_above_upper_is_ambiguous() {
        assert_eq!(kind(&[-1.0, 0.2]), ActionKind::Ambiguous);
    }

    #[test]
    fn empty_scores_error() {
        assert_eq!(
            decide_action(&[], &Thresholds::POPQA),
            Err(CoreError::EmptyScores)
        );
    }

    #[test]
    fn scores_are_kept_aligned() {
        let s = scores(&[0.1, 0.9, -0.3]);
        assert_eq!(decide_action(&s, &Thresholds::POPQA).unwrap().doc_scores, s);
    }

    fn score_list() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..=1.0, 1..8)
    }

    proptest! {
        #[test]
        fn permutation_invariant(mut values in score_list(), seed in any::<u64>()) {
            let before = kind(&values);
            let n = values.len();
            values.rotate_left((seed as usize) % n);
            values.reverse();
            prop_assert_eq!(before, kind(&values));
        }

        #[test]
        fn raising_a_score_never_lowers_the_action(
            values in score_list(),
            idx in any::<prop::sample::Index>(),
            bump in 0.0f64..=2.0,
        ) {
            let before = kind(&values);
            let mut raised = values.clone();
            let i = idx.index(raised.len());
            raised[i] = (raised[i] + bump).min(1.0);
            prop_assert!(kind(&raised).rank() >= before.rank());
        }
    }
}
