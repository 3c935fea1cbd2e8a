use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use once_cell::sync::OnceCell;

use super::{format_evaluator_input, BackendError, EvaluatorBackend};
use crate::disk_cache::{content_key, DiskCache};
use crate::types::RelevanceScore;

/// Memoizing evaluator keyed by a hash of the formatted `question [SEP]
/// document` input. Concurrent requests for the same key wait on a single
/// inner call. An optional disk layer persists scores across runs.
pub struct CachedEvaluator<E> {
    inner: E,
    memo: Mutex<HashMap<String, Arc<OnceCell<RelevanceScore>>>>,
    disk: Option<DiskCache>,
    inner_calls: AtomicUsize,
}

impl<E: EvaluatorBackend> CachedEvaluator<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            memo: Mutex::new(HashMap::new()),
            disk: None,
            inner_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_disk(mut self, disk: DiskCache) -> Self {
        self.disk = Some(disk);
        self
    }

    /// Number of calls forwarded to the wrapped evaluator.
    pub fn inner_calls(&self) -> usize {
        self.inner_calls.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: EvaluatorBackend> EvaluatorBackend for CachedEvaluator<E> {
    fn score(&self, question: &str, document: &str) -> Result<RelevanceScore, BackendError> {
        let key = content_key(&[&format_evaluator_input(question, document)?]);
        let cell = {
            let mut memo = self.memo.lock().expect("evaluator cache poisoned");
            memo.entry(key.clone()).or_default().clone()
        };
        cell.get_or_try_init(|| {
            if let Some(disk) = &self.disk {
                if let Some(v) = disk.get::<f64>(&key) {
                    if let Ok(score) = RelevanceScore::new(v) {
                        return Ok(score);
                    }
                }
            }
            self.inner_calls.fetch_add(1, Ordering::SeqCst);
            let score = self.inner.score(question, document)?;
            if let Some(disk) = &self.disk {
                if let Err(e) = disk.put(&key, &score.value()) {
                    log::warn!("failed to persist evaluator score: {e}");
                }
            }
            Ok(score)
        })
        .copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::StubEvaluator;
    use std::thread;

    #[test]
    fn repeated_pairs_hit_inner_once() {
        let cached = CachedEvaluator::new(StubEvaluator::new());
        for _ in 0..5 {
            cached.score("a b", "a c").unwrap();
        }
        cached.score("a b", "a d").unwrap();
        assert_eq!(cached.inner_calls(), 2);
        assert_eq!(cached.inner().calls(), 2);
    }

    #[test]
    fn concurrent_callers_share_one_inner_call() {
        let cached = CachedEvaluator::new(StubEvaluator::new());
        thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| cached.score("x y", "y z").unwrap());
            }
        });
        assert_eq!(cached.inner().calls(), 1);
    }

    #[test]
    fn disk_layer_survives_new_process_state() {
        let dir = tempfile::tempdir().unwrap();
        let first = CachedEvaluator::new(StubEvaluator::new())
            .with_disk(DiskCache::open(dir.path()).unwrap());
        let a = first.score("p q", "q r").unwrap();
        let second = CachedEvaluator::new(StubEvaluator::new())
            .with_disk(DiskCache::open(dir.path()).unwrap());
        assert_eq!(second.score("p q", "q r").unwrap(), a);
        assert_eq!(second.inner().calls(), 0);
    }

    #[test]
    fn errors_are_not_cached() {
        let cached = CachedEvaluator::new(StubEvaluator::new());
        assert!(cached.score("", "d").is_err());
        assert_eq!(cached.inner_calls(), 0);
    }
}
