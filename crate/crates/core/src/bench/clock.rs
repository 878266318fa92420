use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

/// Source of timestamps for the harness.
pub trait Clock: Send + Sync {
    /// Nanoseconds since an arbitrary, fixed origin. Never decreases.
    fn now_ns(&self) -> u64;

    /// Smallest observable nonzero difference between two readings.
    fn resolution(&self) -> Duration;
}

/// The process's monotonic clock.
#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    origin: Instant,
}

impl Default for MonotonicClock {
    fn default() -> Self {
        MonotonicClock { origin: Instant::now() }
    }
}

impl Clock for MonotonicClock {
    fn now_ns(&self) -> u64 {
        self.origin.elapsed().as_nanos() as u64
    }

    fn resolution(&self) -> Duration {
        clock_resolution()
    }
}

/// A clock that only moves when told to. Backends that simulate cost
/// advance it instead of spending real time, which makes every timing
/// bit-for-bit reproducible.
#[derive(Debug, Default)]
pub struct VirtualClock {
    ticks: AtomicU64,
}

impl VirtualClock {
    pub fn advance(&self, ns: u64) {
        self.ticks.fetch_add(ns, Ordering::SeqCst);
    }
}

impl Clock for VirtualClock {
    fn now_ns(&self) -> u64 {
        self.ticks.load(Ordering::SeqCst)
    }

    fn resolution(&self) -> Duration {
        Duration::from_nanos(1)
    }
}

/// Smallest nonzero tick of [`Instant`], measured once per process.
pub fn clock_resolution() -> Duration {
    static RESOLUTION: OnceLock<Duration> = OnceLock::new();
    *RESOLUTION.get_or_init(measure_resolution)
}

fn measure_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..2_000 {
        let start = Instant::now();
        let mut next = Instant::now();
        while next <= start {
            next = Instant::now();
        }
        best = best.min(next - start);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_is_positive_cached_and_fine_enough() {
        let r = clock_resolution();
        assert!(r > Duration::ZERO);
        assert_eq!(r, clock_resolution());
        assert!(r <= Duration::from_millis(1), "{r:?}");
    }

    #[test]
    fn virtual_clock_moves_only_when_advanced() {
        let c = VirtualClock::default();
        assert_eq!(c.now_ns(), 0);
        c.advance(42);
        assert_eq!(c.now_ns(), 42);
        assert_eq!(c.resolution(), Duration::from_nanos(1));
    }
}
