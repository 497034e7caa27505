//! Seedable simulator and analysis toolkit for sequential spin measurements
//! and singlet pairs.
//!
//! The crate has three layers:
//!
//! * generators ([`quantum`], [`hv`]) that produce measurement outcomes for
//!   single-particle chains and two-particle pairs, under either the quantum
//!   collapse rule or a local hidden-variable rule, plus counterfactual
//!   "what would the other axes have given" tables;
//! * [`estimators`] that turn aligned outcome columns into correlation
//!   estimates and evaluate three- and four-correlation aggregation bounds;
//! * an [`audit`] layer that tracks where every column came from and
//!   classifies each bound report by whether its terms could have coexisted
//!   in one sample without assigning a particle two polarizations at once.
//!
//! All randomness flows through [`rng::rng_stream`]; identical seeds replay
//! identical experiments on any platform.

pub mod audit;
pub mod axis;
pub mod error;
pub mod estimators;
pub mod event;
pub mod hv;
pub mod outcome;
pub mod prep;
pub mod quantum;
pub mod rng;
pub mod time;

pub use axis::{axis_dot, Axis, GEOM_TOL};
pub use error::{Error, Result};
pub use event::{MeasurementEvent, ParticleId, Side};
pub use outcome::Outcome;
pub use prep::{PrepOrigin, PreparationState};
pub use rng::{rng_stream, RngStream};
pub use time::{LogicalTime, PairTimes, TimeRole};

pub use audit::{
    audit_abi, locality_substitution_audit, nopl_check, AuditVerdict, Classification, ColumnId,
    IndexSet, McdColumns, NoplReport, PrepConflict, PrepSource, ProvenanceLedger,
};
pub use estimators::{
    bound_oracle, convergence_trace, correlate, correlate_traced, eval_v3, eval_v4, lhs_value,
    merge, statistical_slack, AbiKind, AbiReport, ConvergenceReport, CorrelationEstimate,
    Provenance, TracePoint,
};
pub use hv::{
    draw_hidden, exotic_values, generate_lhv_batch, generate_lhv_batch_serial,
    lhv_correlation_exact, lhv_outcome, mcd_fill, CounterfactualRecord, ExoticValuation,
    HiddenState, McdMode, McdSource, ModelKind,
};
pub use quantum::{
    chain_two_step_correlation, erase_check, generate_singlet, generate_singlet_batch,
    generate_singlet_batch_serial, measure_chain, sample_joint_direct, OrderPolicy,
    PairBatchSpec, SingleParticleChain, SingletPair,
};

/// Library version, echoed into experiment summaries.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
