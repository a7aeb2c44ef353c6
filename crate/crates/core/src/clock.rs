//! Wall-clock access, injectable so that runs can be made reproducible.

use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, SecondsFormat, Utc};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;

    fn now_rfc3339(&self) -> String {
        self.now().to_rfc3339_opts(SecondsFormat::Millis, true)
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Reports a fixed instant, advancing by `step_ms` on every read.
#[derive(Debug)]
pub struct FixedClock {
    base: DateTime<Utc>,
    step_ms: u64,
    reads: AtomicU64,
}

impl FixedClock {
    pub fn new(base: DateTime<Utc>, step_ms: u64) -> Self {
        Self {
            base,
            step_ms,
            reads: AtomicU64::new(0),
        }
    }

    /// 2024-01-01T00:00:00Z, never advancing.
    pub fn epoch() -> Self {
        Self::new(DateTime::from_timestamp(1_704_067_200, 0).expect("valid instant"), 0)
    }
}

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        let n = self.reads.fetch_add(1, Ordering::Relaxed);
        self.base + chrono::Duration::milliseconds((n * self.step_ms) as i64)
    }
}
