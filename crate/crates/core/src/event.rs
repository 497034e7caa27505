//! Measurement events and particle identity.

use serde::{Deserialize, Serialize};

use crate::axis::Axis;
use crate::outcome::Outcome;
use crate::time::LogicalTime;

/// Which member of a pair a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    P,
    PPrime,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::P => Side::PPrime,
            Side::PPrime => Side::P,
        }
    }

    /// Short label used in CSV output and column ids.
    pub fn label(self) -> &'static str {
        match self {
            Side::P => "p",
            Side::PPrime => "p'",
        }
    }

    pub fn from_label(s: &str) -> Option<Side> {
        match s {
            "p" => Some(Side::P),
            "p'" => Some(Side::PPrime),
            _ => None,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Identity of a simulated particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParticleId {
    /// One member of pair `pair_index`.
    PairMember { pair_index: u64, side: Side },
    /// A standalone particle in a measurement chain.
    Single { sequence_index: u64 },
}

impl std::fmt::Display for ParticleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParticleId::PairMember { pair_index, side } => write!(f, "{}#{}", side, pair_index),
            ParticleId::Single { sequence_index } => write!(f, "s#{}", sequence_index),
        }
    }
}

/// One recorded measurement, real or counterfactual.
///
/// At most one actual (non-counterfactual) measurement may exist per
/// particle per instant; builders enforce this, the audit re-checks it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEvent {
    pub particle: ParticleId,
    pub axis: Axis,
    pub time: LogicalTime,
    pub outcome: Outcome,
    pub counterfactual: bool,
}
