use std::time::{Duration, Instant};

use parking_lot::Mutex;

use crate::error::{Error, Result};

pub trait Clock: Send + Sync {
    /// Time since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { origin: Instant::now() }
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

/// A clock that only moves when slept on; for tests.
#[derive(Default)]
pub struct ManualClock {
    now: Mutex<Duration>,
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        *self.now.lock()
    }

    fn sleep(&self, d: Duration) {
        *self.now.lock() += d;
    }
}

/// Token bucket with a capacity of one request: consecutive permits are at
/// least `1 / rate` apart, so no window of length `T` sees more than
/// `floor(T * rate) + 1` requests.
pub struct RateLimiter<C: Clock> {
    clock: C,
    interval: Duration,
    next_free: Mutex<Duration>,
}

impl<C: Clock> RateLimiter<C> {
    pub fn new(requests_per_second: f64, clock: C) -> Result<Self> {
        if !(requests_per_second.is_finite() && requests_per_second > 0.0) {
            return Err(Error::InvalidArgument(format!("rate limit {requests_per_second} must be positive")));
        }
        Ok(RateLimiter {
            clock,
            interval: Duration::from_secs_f64(1.0 / requests_per_second),
            next_free: Mutex::new(Duration::ZERO),
        })
    }

    pub fn clock(&self) -> &C {
        &self.clock
    }

    /// Blocks until a request may be sent; returns the reserved slot time.
    pub fn acquire(&self) -> Duration {
        let (slot, wait) = {
            let mut next = self.next_free.lock();
            let now = self.clock.now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            (slot, slot - now)
        };
        if !wait.is_zero() {
            self.clock.sleep(wait);
        }
        slot
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permits_are_spaced() {
        let lim = RateLimiter::new(4.0, ManualClock::default()).unwrap();
        let times: Vec<Duration> = (0..50).map(|_| lim.acquire()).collect();
        for w in times.windows(2) {
            assert!(w[1] - w[0] >= Duration::from_millis(250));
        }
        assert!(RateLimiter::new(0.0, ManualClock::default()).is_err());
    }
}
