//! Usage errors shared by all library modules.
//!
//! Every variant describes a caller mistake (bad arguments, missing
//! registration, unmet preconditions). Internal invariant violations are
//! asserted instead.

/// Library-wide usage error.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("axis list must not be empty")]
    EmptyAxes,

    #[error("outcome must be +1 or -1, got {0}")]
    InvalidOutcome(i8),

    #[error("column lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("cannot correlate empty columns")]
    EmptyColumns,

    #[error("provenance lists {indices} indices for {len} values")]
    ProvenanceMismatch { indices: usize, len: usize },

    #[error("running history was not retained for this estimate")]
    HistoryNotRetained,

    #[error("axis set must not be empty")]
    EmptyAxisSet,

    #[error("axis set is missing the actually measured axis at {angle} rad")]
    ActualAxisMissing { angle: f64 },

    #[error("exotic valuation needs a target axis distinct from the context axis")]
    ExoticAxesEqual,

    #[error("preparation history is not sorted by validity start")]
    UnsortedHistory,

    #[error("column {0:?} is not registered in the provenance ledger")]
    UnregisteredColumn(String),

    #[error("column {0:?} is already registered in the provenance ledger")]
    DuplicateColumn(String),

    #[error("estimate indices are not covered by registered column {column:?}")]
    IndicesNotCovered { column: String },

    #[error("columns do not form a locality-substitution pair: {reason}")]
    NotSubstitutionPair { reason: String },

    #[error("record batch is not uniform: {reason}")]
    NonUniformBatch { reason: String },

    #[error("cannot merge estimates: {reason}")]
    MergeIncompatible { reason: String },
}

/// Result alias used across the library.
pub type Result<T> = std::result::Result<T, Error>;
