//! Discrete logical time.
//!
//! The simulator only needs event ordering, not durations: pair creation
//! strictly precedes the first measurement, which precedes (or coincides
//! with) the second, and everything ends by a per-experiment horizon.

use serde::{Deserialize, Serialize};

/// What an instant marks in a particle's life.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TimeRole {
    /// Source emission (pair creation or chain preparation).
    Creation,
    /// The particle's first measurement.
    FirstMeasure,
    /// Any later interaction.
    Later,
}

/// An instant on the experiment's discrete clock.
///
/// Ordering is by `tick` first, then by role; intervals elsewhere compare
/// ticks only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LogicalTime {
    pub tick: u64,
    pub role: TimeRole,
}

impl LogicalTime {
    pub fn creation(tick: u64) -> LogicalTime {
        LogicalTime { tick, role: TimeRole::Creation }
    }

    pub fn first_measure(tick: u64) -> LogicalTime {
        LogicalTime { tick, role: TimeRole::FirstMeasure }
    }

    pub fn later(tick: u64) -> LogicalTime {
        LogicalTime { tick, role: TimeRole::Later }
    }
}

/// Clock layout of one pair: created at `created`, sides measured at
/// `first` and `second`, nothing after `horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTimes {
    pub created: LogicalTime,
    pub first: LogicalTime,
    pub second: LogicalTime,
    pub horizon: LogicalTime,
}

impl PairTimes {
    /// Checks `created < min(first, second) <= max(first, second) <= horizon`.
    pub fn is_ordered(&self) -> bool {
        let lo = self.first.tick.min(self.second.tick);
        let hi = self.first.tick.max(self.second.tick);
        self.created.tick < lo && hi <= self.horizon.tick
    }
}

/// Tick at which every pair is created.
pub const PAIR_CREATED_TICK: u64 = 0;
/// Tick of the first side's measurement.
pub const PAIR_FIRST_TICK: u64 = 1;
/// Tick of the second side's measurement.
pub const PAIR_SECOND_TICK: u64 = 2;
/// Pair experiments are over after this tick.
pub const PAIR_HORIZON_TICK: u64 = 3;
