//! Preparation states and the rules that create them.
//!
//! A particle holds at most one preparation at a time, valid over a
//! half-open tick interval. The two rules below are the only ways the
//! simulator prepares a particle, and the audit module reuses them verbatim
//! when reconstructing what recorded data implies:
//!
//! * a measurement along `m` with outcome `s` leaves the particle prepared
//!   along `m.oriented(s)`;
//! * measuring one pair member along `m` with outcome `s` leaves its partner
//!   prepared along `m.reversed().oriented(s)`.
//!
//! Orientation folds the outcome sign into the axis, so every preparation
//! has a canonical single-axis form and "one preparation at a time" is
//! checkable as axis disjointness over overlapping intervals.

use serde::{Deserialize, Serialize};

use crate::axis::Axis;
use crate::outcome::Outcome;
use crate::time::LogicalTime;

/// How a preparation came about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrepOrigin {
    /// Fresh from the source, no polarization.
    Source,
    /// The particle itself was measured.
    DirectMeasurement,
    /// The particle's partner was measured.
    PartnerCollapse,
}

/// A particle's preparation over a validity window.
///
/// `prepared_axis = None` means unpolarized. `valid_until` is exclusive: a
/// measurement at tick `t` consumes the preparation whose window ends at `t`
/// and starts a new window at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreparationState {
    pub prepared_axis: Option<Axis>,
    pub valid_from: LogicalTime,
    pub valid_until: LogicalTime,
    pub origin: PrepOrigin,
}

impl PreparationState {
    /// Unpolarized emission, valid on `[from, until)`.
    pub fn source(from: LogicalTime, until: LogicalTime) -> PreparationState {
        PreparationState {
            prepared_axis: None,
            valid_from: from,
            valid_until: until,
            origin: PrepOrigin::Source,
        }
    }

    /// State left behind by measuring this particle along `axis` with `outcome`.
    pub fn from_measurement(
        axis: Axis,
        outcome: Outcome,
        from: LogicalTime,
        until: LogicalTime,
    ) -> PreparationState {
        PreparationState {
            prepared_axis: Some(axis.oriented(outcome)),
            valid_from: from,
            valid_until: until,
            origin: PrepOrigin::DirectMeasurement,
        }
    }

    /// State induced on the partner when the other member is measured along
    /// `partner_axis` with `partner_outcome`.
    pub fn from_partner_collapse(
        partner_axis: Axis,
        partner_outcome: Outcome,
        from: LogicalTime,
        until: LogicalTime,
    ) -> PreparationState {
        PreparationState {
            prepared_axis: Some(partner_axis.reversed().oriented(partner_outcome)),
            valid_from: from,
            valid_until: until,
            origin: PrepOrigin::PartnerCollapse,
        }
    }

    /// Whether the validity windows intersect (tick granularity).
    pub fn overlaps(&self, other: &PreparationState) -> bool {
        let lo = self.valid_from.tick.max(other.valid_from.tick);
        let hi = self.valid_until.tick.min(other.valid_until.tick);
        lo < hi
    }

    /// Whether the two states assert different polarizations of one particle
    /// at the same time: overlapping windows, both polarized, distinct axes.
    pub fn conflicts_with(&self, other: &PreparationState) -> bool {
        match (self.prepared_axis, other.prepared_axis) {
            (Some(a), Some(b)) => self.overlaps(other) && !a.approx_eq(b),
            _ => false,
        }
    }
}
