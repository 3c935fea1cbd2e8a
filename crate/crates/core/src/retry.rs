//! Exponential backoff shared by the model backends and the Wikipedia client.

use std::thread;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(200),
            max_delay: Duration::from_secs(5),
        }
    }
}

/// Outcome of one attempt as seen by the retry loop.
#[derive(Debug)]
pub enum Attempt<T, E> {
    Done(T),
    /// Worth retrying: timeouts, connection failures, 5xx.
    Transient(E),
    Fatal(E),
}

impl RetryPolicy {
    pub fn delay_for(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }

    /// Runs `op` until it succeeds, fails fatally, or exhausts the retries.
    /// The closure receives the zero-based attempt number.
    pub fn run<T, E>(&self, mut op: impl FnMut(u32) -> Attempt<T, E>) -> Result<T, E> {
        let mut attempt = 0;
        loop {
            match op(attempt) {
                Attempt::Done(v) => return Ok(v),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Transient(e) => {
                    if attempt >= self.max_retries {
                        return Err(e);
                    }
                    let delay = self.delay_for(attempt);
                    log::debug!("transient failure on attempt {attempt}, retrying in {delay:?}");
                    thread::sleep(delay);
                    attempt += 1;
                }
            }
        }
    }
}
