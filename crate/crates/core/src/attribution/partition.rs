//! Budgeted hierarchical attribution over a midpoint binary partition.
//!
//! The root span (all tokens) carries `v(N) - v(∅)`. A span `T` split into
//! halves `L` and `R` gives each half its two-player Shapley share of
//! `T`'s contribution, averaged over two states of the complement of `T`:
//! fully masked and fully present. With `C` the complement state,
//!
//! ```text
//! share_C(L) = ½ [ (v(C∪L) − v(C)) + (v(C∪T) − v(C∪R)) ]
//! ```
//!
//! Any difference between the span's assigned amount and the sum of the two
//! shares is split evenly between the halves, so values always sum to
//! `v(N) − v(∅)`. Spans are expanded breadth first; a span whose expansion
//! would exceed the budget of distinct scorer calls has its amount spread
//! uniformly over its tokens. Every split after the root costs at most four
//! new calls, so a budget of `4n` expands all spans.

use std::collections::{HashMap, VecDeque};

use super::{mask_render, Attribution, AttributionError, Method, TokenizedInput};
use crate::backend::BackendError;

struct Game<'a, F> {
    input: &'a TokenizedInput,
    scorer: F,
    memo: HashMap<Vec<bool>, f64>,
}

impl<F> Game<'_, F>
where
    F: FnMut(&str) -> Result<f64, BackendError>,
{
    fn value(&mut self, keep: Vec<bool>) -> Result<f64, BackendError> {
        if let Some(&v) = self.memo.get(&keep) {
            return Ok(v);
        }
        let v = (self.scorer)(&mask_render(self.input, &keep))?;
        self.memo.insert(keep, v);
        Ok(v)
    }

    fn calls(&self) -> usize {
        self.memo.len()
    }

    fn missing(&self, coalitions: &[Vec<bool>]) -> usize {
        let mut seen: Vec<&Vec<bool>> = Vec::new();
        for c in coalitions {
            if !self.memo.contains_key(c) && !seen.contains(&c) {
                seen.push(c);
            }
        }
        seen.len()
    }
}

/// Every token starts as `outside_on`; `spans_off` are then cleared and
/// `spans_on` set.
fn coalition(
    n: usize,
    spans_on: &[(usize, usize)],
    outside_on: bool,
    spans_off: &[(usize, usize)],
) -> Vec<bool> {
    let mut keep = vec![outside_on; n];
    for &(lo, hi) in spans_off {
        keep[lo..hi].iter_mut().for_each(|k| *k = false);
    }
    for &(lo, hi) in spans_on {
        keep[lo..hi].iter_mut().for_each(|k| *k = true);
    }
    keep
}

pub fn partition_shapley<F>(
    input: &TokenizedInput,
    scorer: F,
    budget: usize,
) -> Result<Attribution, AttributionError>
where
    F: FnMut(&str) -> Result<f64, BackendError>,
{
    let n = input.len();
    if n == 0 {
        return Err(AttributionError::EmptyInput("token sequence"));
    }
    let mut game = Game {
        input,
        scorer,
        memo: HashMap::new(),
    };
    let base = game.value(vec![false; n])?;
    let full = game.value(vec![true; n])?;
    let mut values = vec![0.0; n];

    let mut queue = VecDeque::from([(0usize, n, full - base)]);
    while let Some((lo, hi, amount)) = queue.pop_front() {
        if hi - lo == 1 {
            values[lo] = amount;
            continue;
        }
        let mid = lo + (hi - lo) / 2;
        let (l, r, t) = ((lo, mid), (mid, hi), (lo, hi));

        // Complement masked.
        let l_only = coalition(n, &[l], false, &[]);
        let r_only = coalition(n, &[r], false, &[]);
        let t_only = coalition(n, &[t], false, &[]);
        // Complement present.
        let without_t = coalition(n, &[], true, &[t]);
        let without_r = coalition(n, &[], true, &[r]);
        let without_l = coalition(n, &[], true, &[l]);

        let needed = [
            l_only.clone(),
            r_only.clone(),
            t_only.clone(),
            without_t.clone(),
            without_r.clone(),
            without_l.clone(),
        ];
        if game.calls() + game.missing(&needed) > budget {
            let each = amount / (hi - lo) as f64;
            values[lo..hi].iter_mut().for_each(|v| *v = each);
            continue;
        }

        let v_l = game.value(l_only)?;
        let v_r = game.value(r_only)?;
        let v_t = game.value(t_only)?;
        let v_not_t = game.value(without_t)?;
        let v_not_r = game.value(without_r)?;
        let v_not_l = game.value(without_l)?;

        let share_l_off = 0.5 * ((v_l - base) + (v_t - v_r));
        let share_r_off = 0.5 * ((v_r - base) + (v_t - v_l));
        let share_l_on = 0.5 * ((v_not_r - v_not_t) + (full - v_not_l));
        let share_r_on = 0.5 * ((v_not_l - v_not_t) + (full - v_not_r));
        let share_l = 0.5 * (share_l_off + share_l_on);
        let share_r = 0.5 * (share_r_off + share_r_on);
        let residual = amount - (share_l + share_r);

        queue.push_back((lo, mid, share_l + residual / 2.0));
        queue.push_back((mid, hi, share_r + residual / 2.0));
    }

    Ok(Attribution {
        values,
        base_value: base,
        full_value: full,
        method: Method::Partition,
    })
}
