//! Token-bucket rate limiting over a pluggable clock.

use std::sync::Mutex;
use std::time::{Duration, Instant};

pub trait Clock: Send + Sync {
    /// Time since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d)
    }
}

/// Deterministic clock for tests: `sleep` advances time instantly.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now: Mutex<Duration>,
}

impl VirtualClock {
    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }
}

/// Bucket holding at most one token, refilled at `rate` tokens per second.
/// Successive grants are therefore spaced at least `1 / rate` apart, so any
/// half-open one-second window holds at most `ceil(rate)` grants.
///
/// Callers reserve a slot under the lock and sleep outside it, so
/// concurrent callers queue in arrival order.
pub struct TokenBucket {
    rate: f64,
    clock: Box<dyn Clock>,
    /// Earliest time the next grant may happen.
    next_free: Mutex<Option<Duration>>,
}

impl TokenBucket {
    pub fn new(rate: f64, clock: Box<dyn Clock>) -> Self {
        assert!(rate > 0.0 && rate.is_finite(), "rate must be positive");
        Self {
            rate,
            clock,
            next_free: Mutex::new(None),
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn clock(&self) -> &dyn Clock {
        self.clock.as_ref()
    }

    /// Blocks until a request may be issued; returns the grant time.
    pub fn acquire(&self) -> Duration {
        let interval = Duration::from_secs_f64(1.0 / self.rate);
        let (grant, wait) = {
            let mut next = self.next_free.lock().expect("rate limiter poisoned");
            let now = self.clock.now();
            let grant = match *next {
                Some(t) if t > now => t,
                _ => now,
            };
            *next = Some(grant + interval);
            (grant, grant.saturating_sub(now))
        };
        if !wait.is_zero() {
            self.clock.sleep(wait);
        }
        grant
    }
}
