use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use super::TranslateError;

/// Time source for rate limiting and retry backoff.
pub trait Clock: Send + Sync {
    /// Time elapsed since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Manually driven clock; `sleep` just advances time.
#[derive(Debug, Default)]
pub struct FakeClock {
    now: Mutex<Duration>,
}

impl FakeClock {
    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }
}

impl Clock for FakeClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }
}

/// Sliding-window limiter: at most `ceil(rate)` calls per window of
/// `ceil(rate) / rate` seconds, so no 1-second window ever sees more than
/// `ceil(rate)` calls.
pub struct RateLimiter {
    capacity: usize,
    window: Duration,
    clock: Arc<dyn Clock>,
    recent: Mutex<VecDeque<Duration>>,
}

impl RateLimiter {
    pub fn new(rate_per_second: f64, clock: Arc<dyn Clock>) -> Result<Self, TranslateError> {
        if !(rate_per_second.is_finite() && rate_per_second > 0.0) {
            return Err(TranslateError::Config(format!(
                "rate limit must be positive, got {rate_per_second}"
            )));
        }
        let capacity = rate_per_second.ceil() as usize;
        Ok(RateLimiter {
            capacity,
            window: Duration::from_secs_f64(capacity as f64 / rate_per_second),
            clock,
            recent: Mutex::new(VecDeque::with_capacity(capacity)),
        })
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Block until a call slot is free, then claim it. Returns the claimed
    /// slot time.
    pub fn acquire(&self) -> Duration {
        let mut recent = self.recent.lock().unwrap();
        loop {
            let now = self.clock.now();
            while recent.front().is_some_and(|&t| t + self.window <= now) {
                recent.pop_front();
            }
            if recent.len() < self.capacity {
                recent.push_back(now);
                return now;
            }
            let oldest = *recent.front().expect("full window");
            self.clock.sleep(oldest + self.window - now);
        }
    }
}
