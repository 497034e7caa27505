//! Sample-provenance ledger and the audits built on it.
//!
//! Every data column entering a correlation is registered here with its
//! originating rows and enough per-row state to reconstruct which
//! preparations each particle actually held, and which extra preparations a
//! given *use* of the data quietly assumes. The audits then classify an
//! evaluation:
//!
//! * `SINGLE_SAMPLE`: every term draws the same rows from one registered
//!   family, and no row needs a particle to hold two different preparations.
//! * `MULTI_SAMPLE`: terms draw from different families or different row
//!   sets (the usual experimental practice; informational, not an error).
//! * `MIXED_PREPARATION`: at least one row requires one particle to be
//!   prepared along two non-collinear oriented axes over overlapping ticks.
//!   This is the strongest verdict; it marks data uses that no single
//!   physical history can support.
//!
//! Preparation imputation is table-driven: a measurement (actual or
//! counterfactual) re-prepares its particle along the measured axis oriented
//! by the outcome, and evaluating a cross-side correlation as a collapse
//! chain imputes onto the second-measured particle the partner's
//! reversed-axis preparation. Sign-rule (hidden-angle) data carries no
//! preparation semantics: the hidden state already explains both sides, so
//! those columns never impute anything.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::axis::Axis;
use crate::error::{Error, Result};
use crate::estimators::CorrelationEstimate;
use crate::event::Side;
use crate::hv::{CounterfactualRecord, McdMode, ModelKind};
use crate::outcome::Outcome;
use crate::prep::PreparationState;
use crate::quantum::SingletPair;
use crate::time::{PAIR_FIRST_TICK, PAIR_HORIZON_TICK, PAIR_SECOND_TICK};

/// Name of one registered data column, e.g. `"b0/p"` or `"t0/p'/a2"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnId(pub String);

impl ColumnId {
    pub fn new(s: impl Into<String>) -> ColumnId {
        ColumnId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for ColumnId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ColumnId {
    fn from(s: &str) -> ColumnId {
        ColumnId(s.to_owned())
    }
}

/// Set of pair indices a column or estimate draws from.
///
/// Kept sorted and duplicate-free; contiguous runs collapse to a range so
/// million-row batches cost two integers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexSet {
    /// Half-open `[start, end)`.
    Range { start: u64, end: u64 },
    /// Sorted, deduplicated list.
    Explicit(Vec<u64>),
}

impl IndexSet {
    pub fn range(start: u64, end: u64) -> IndexSet {
        assert!(start <= end, "inverted index range");
        IndexSet::Range { start, end }
    }

    /// Builds from arbitrary indices; sorts, deduplicates, and collapses to
    /// a range when contiguous.
    pub fn explicit(mut indices: Vec<u64>) -> IndexSet {
        indices.sort_unstable();
        indices.dedup();
        IndexSet::normalized(indices)
    }

    fn normalized(indices: Vec<u64>) -> IndexSet {
        match (indices.first(), indices.last()) {
            (Some(&first), Some(&last)) if last - first + 1 == indices.len() as u64 => {
                IndexSet::Range { start: first, end: last + 1 }
            }
            _ => IndexSet::Explicit(indices),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            IndexSet::Range { start, end } => (end - start) as usize,
            IndexSet::Explicit(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, index: u64) -> bool {
        match self {
            IndexSet::Range { start, end } => (*start..*end).contains(&index),
            IndexSet::Explicit(v) => v.binary_search(&index).is_ok(),
        }
    }

    /// Row position of `index` within this set's sorted order.
    pub fn position(&self, index: u64) -> Option<usize> {
        match self {
            IndexSet::Range { start, end } => {
                (*start..*end).contains(&index).then(|| (index - start) as usize)
            }
            IndexSet::Explicit(v) => v.binary_search(&index).ok(),
        }
    }

    /// Index stored at row `pos`.
    pub fn at(&self, pos: usize) -> u64 {
        match self {
            IndexSet::Range { start, .. } => start + pos as u64,
            IndexSet::Explicit(v) => v[pos],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.len()).map(move |pos| self.at(pos))
    }

    /// Set equality regardless of representation.
    pub fn set_eq(&self, other: &IndexSet) -> bool {
        self.len() == other.len() && self.iter().zip(other.iter()).all(|(a, b)| a == b)
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        match (self, other) {
            (IndexSet::Range { start, end }, IndexSet::Range { start: s, end: e }) => {
                self.is_empty() || (start >= s && end <= e)
            }
            _ => self.iter().all(|i| other.contains(i)),
        }
    }

    pub fn is_disjoint(&self, other: &IndexSet) -> bool {
        if self.len() > other.len() {
            return other.is_disjoint(self);
        }
        self.iter().all(|i| !other.contains(i))
    }

    /// Set union, re-collapsing to a range when the result is contiguous.
    pub fn union(&self, other: &IndexSet) -> IndexSet {
        if let (IndexSet::Range { start, end }, IndexSet::Range { start: s, end: e }) =
            (self, other)
        {
            // Touching or overlapping ranges merge without materializing.
            if *start <= *e && *s <= *end {
                return IndexSet::Range { start: (*start).min(*s), end: (*end).max(*e) };
            }
        }
        let mut all: Vec<u64> = self.iter().chain(other.iter()).collect();
        all.sort_unstable();
        all.dedup();
        IndexSet::normalized(all)
    }
}

impl std::fmt::Display for IndexSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IndexSet::Range { start, end } => write!(f, "[{start}, {end})"),
            IndexSet::Explicit(v) => write!(f, "{{{} indices}}", v.len()),
        }
    }
}

/// Outcome of classifying an evaluation's data lineage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    SingleSample,
    MultiSample,
    MixedPreparation,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::SingleSample => "SINGLE_SAMPLE",
            Classification::MultiSample => "MULTI_SAMPLE",
            Classification::MixedPreparation => "MIXED_PREPARATION",
        })
    }
}

/// Where an imputed preparation claim comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PrepSource {
    /// The particle's own recorded measurement.
    ActualMeasurement { column: ColumnId },
    /// The recorded partner measurement collapsing this particle.
    PartnerCollapse,
    /// A counterfactual cell treated as a measurement made instead.
    CounterfactualCell { column: ColumnId },
    /// Evaluating a cross-side correlation as a collapse chain, which
    /// requires this particle to have been collapsed by the paired column.
    PairingCollapse { column: ColumnId },
    /// A stand-in column substituted for this particle's own value.
    Substitution { column: ColumnId },
}

/// One oriented preparation a data use requires, with its validity window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputedPrep {
    /// Oriented axis (the direction a `+1` re-measurement would confirm).
    pub axis: Axis,
    pub from_tick: u64,
    pub until_tick: u64,
    pub source: PrepSource,
}

/// Two preparations required of one particle over overlapping ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepConflict {
    pub pair_index: u64,
    pub side: Side,
    pub first: ImputedPrep,
    pub second: ImputedPrep,
}

/// Classification plus supporting evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditVerdict {
    pub classification: Classification,
    /// Human-readable per-column and per-decision explanations.
    pub details: Vec<String>,
    /// Every row index requiring two incompatible preparations.
    pub offending_indices: Vec<u64>,
    /// Machine-readable samples of the conflicts (capped).
    pub conflicts: Vec<PrepConflict>,
}

impl AuditVerdict {
    fn clean(classification: Classification, details: Vec<String>) -> AuditVerdict {
        AuditVerdict { classification, details, offending_indices: Vec::new(), conflicts: Vec::new() }
    }
}

/// Cap on stored [`PrepConflict`] samples; `offending_indices` stays complete.
const MAX_CONFLICT_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum ColumnRole {
    /// The recorded measurement outcomes of one side.
    Actual,
    /// Cell column of a counterfactual table at axis-set position.
    Cell(usize),
    /// Ingested values without preparation semantics.
    External(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ColumnRef {
    family: usize,
    side: Side,
    role: ColumnRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum FamilyRecord {
    /// One generated pair batch; both sides measured once along fixed axes.
    Batch {
        name: String,
        model: ModelKind,
        indices: IndexSet,
        axis_p: Axis,
        axis_pp: Axis,
        outcomes_p: Vec<i8>,
        outcomes_pp: Vec<i8>,
        first_p: Vec<bool>,
    },
    /// One counterfactual table over a fixed axis set.
    McdTable {
        name: String,
        mode: McdMode,
        indices: IndexSet,
        axis_set: Vec<Axis>,
        actual_p: usize,
        actual_pp: usize,
        first_p: Vec<bool>,
        /// Row-major `n x axis_set.len()` cell values per side.
        cells_p: Vec<i8>,
        cells_pp: Vec<i8>,
    },
    /// Ingested sign columns; aligned rows, no preparation semantics.
    External { name: String, indices: IndexSet, values: Vec<Vec<i8>> },
}

impl FamilyRecord {
    fn name(&self) -> &str {
        match self {
            FamilyRecord::Batch { name, .. } => name,
            FamilyRecord::McdTable { name, .. } => name,
            FamilyRecord::External { name, .. } => name,
        }
    }

    fn indices(&self) -> &IndexSet {
        match self {
            FamilyRecord::Batch { indices, .. } => indices,
            FamilyRecord::McdTable { indices, .. } => indices,
            FamilyRecord::External { indices, .. } => indices,
        }
    }

    /// Whether values from this family carry collapse/re-preparation
    /// semantics at all. Sign-rule data and external data do not.
    fn has_prep_semantics(&self) -> bool {
        match self {
            FamilyRecord::Batch { model, .. } => *model == ModelKind::Qm,
            FamilyRecord::McdTable { mode, .. } => *mode == McdMode::QmCollapse,
            FamilyRecord::External { .. } => false,
        }
    }

    fn actual_axis(&self, side: Side) -> Option<Axis> {
        match self {
            FamilyRecord::Batch { axis_p, axis_pp, .. } => Some(match side {
                Side::P => *axis_p,
                Side::PPrime => *axis_pp,
            }),
            FamilyRecord::McdTable { axis_set, actual_p, actual_pp, .. } => Some(match side {
                Side::P => axis_set[*actual_p],
                Side::PPrime => axis_set[*actual_pp],
            }),
            FamilyRecord::External { .. } => None,
        }
    }

    fn actual_position(&self, side: Side) -> Option<usize> {
        match self {
            FamilyRecord::McdTable { actual_p, actual_pp, .. } => Some(match side {
                Side::P => *actual_p,
                Side::PPrime => *actual_pp,
            }),
            _ => None,
        }
    }

    fn actual_value(&self, side: Side, row: usize) -> i8 {
        match self {
            FamilyRecord::Batch { outcomes_p, outcomes_pp, .. } => match side {
                Side::P => outcomes_p[row],
                Side::PPrime => outcomes_pp[row],
            },
            FamilyRecord::McdTable { .. } => {
                let pos = self.actual_position(side).unwrap();
                self.cell_value(side, row, pos)
            }
            FamilyRecord::External { .. } => unreachable!("external columns have no actual side"),
        }
    }

    fn cell_value(&self, side: Side, row: usize, axis_idx: usize) -> i8 {
        match self {
            FamilyRecord::McdTable { axis_set, cells_p, cells_pp, .. } => {
                let cells = match side {
                    Side::P => cells_p,
                    Side::PPrime => cells_pp,
                };
                cells[row * axis_set.len() + axis_idx]
            }
            _ => unreachable!("cell columns only exist on counterfactual tables"),
        }
    }

    fn measured_first(&self, side: Side, row: usize) -> bool {
        let first_p = match self {
            FamilyRecord::Batch { first_p, .. } => first_p,
            FamilyRecord::McdTable { first_p, .. } => first_p,
            FamilyRecord::External { .. } => unreachable!("external columns have no time order"),
        };
        match side {
            Side::P => first_p[row],
            Side::PPrime => !first_p[row],
        }
    }

    fn column_value(&self, col: &ColumnRef, row: usize) -> i8 {
        match col.role {
            ColumnRole::Actual => self.actual_value(col.side, row),
            ColumnRole::Cell(j) => self.cell_value(col.side, row, j),
            ColumnRole::External(k) => match self {
                FamilyRecord::External { values, .. } => values[k][row],
                _ => unreachable!(),
            },
        }
    }

    fn column_axis(&self, col: &ColumnRef) -> Option<Axis> {
        match col.role {
            ColumnRole::Actual => self.actual_axis(col.side),
            ColumnRole::Cell(j) => match self {
                FamilyRecord::McdTable { axis_set, .. } => Some(axis_set[j]),
                _ => None,
            },
            ColumnRole::External(_) => None,
        }
    }
}

/// Column ids created by [`ProvenanceLedger::register_mcd_batch`], one per
/// axis-set position and side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McdColumns {
    pub axis_set: Vec<Axis>,
    pub p: Vec<ColumnId>,
    pub pp: Vec<ColumnId>,
    pub actual_p: usize,
    pub actual_pp: usize,
}

impl McdColumns {
    pub fn column(&self, side: Side, axis_idx: usize) -> &ColumnId {
        match side {
            Side::P => &self.p[axis_idx],
            Side::PPrime => &self.pp[axis_idx],
        }
    }
}

/// Append-only registry tying every data column to its generating rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceLedger {
    families: Vec<FamilyRecord>,
    columns: BTreeMap<ColumnId, ColumnRef>,
}

impl ProvenanceLedger {
    pub fn new() -> ProvenanceLedger {
        ProvenanceLedger::default()
    }

    pub fn column_ids(&self) -> impl Iterator<Item = &ColumnId> {
        self.columns.keys()
    }

    pub fn contains_column(&self, id: &ColumnId) -> bool {
        self.columns.contains_key(id)
    }

    fn resolve(&self, id: &ColumnId) -> Result<(&FamilyRecord, &ColumnRef)> {
        let col = self
            .columns
            .get(id)
            .ok_or_else(|| Error::UnregisteredColumn(id.0.clone()))?;
        Ok((&self.families[col.family], col))
    }

    pub fn column_indices(&self, id: &ColumnId) -> Result<&IndexSet> {
        Ok(self.resolve(id)?.0.indices())
    }

    /// Values of a registered column, in row order.
    pub fn column_values(&self, id: &ColumnId) -> Result<Vec<Outcome>> {
        let (family, col) = self.resolve(id)?;
        Ok((0..family.indices().len())
            .map(|row| Outcome::try_from(family.column_value(col, row)).unwrap())
            .collect())
    }

    fn insert_column(&mut self, id: ColumnId, col: ColumnRef) -> Result<ColumnId> {
        if self.columns.contains_key(&id) {
            return Err(Error::DuplicateColumn(id.0));
        }
        self.columns.insert(id.clone(), col);
        Ok(id)
    }

    /// Registers one generated pair batch; returns the `p` and `p'` column
    /// ids. The batch must be non-empty, single-model, fixed-axis, with
    /// strictly ascending pair indices.
    pub fn register_singlet_batch(
        &mut self,
        name: &str,
        model: ModelKind,
        pairs: &[SingletPair],
    ) -> Result<(ColumnId, ColumnId)> {
        if !matches!(model, ModelKind::Qm | ModelKind::LhvSign) {
            return Err(Error::NonUniformBatch {
                reason: format!("{model} is a table-filling mode, not a pair-generation model"),
            });
        }
        if pairs.is_empty() {
            return Err(Error::NonUniformBatch { reason: "empty batch".into() });
        }
        let (axis_p, axis_pp) = (pairs[0].axis_p, pairs[0].axis_pp);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut outcomes_p = Vec::with_capacity(pairs.len());
        let mut outcomes_pp = Vec::with_capacity(pairs.len());
        let mut first_p = Vec::with_capacity(pairs.len());
        for pair in pairs {
            if !pair.axis_p.approx_eq(axis_p) || !pair.axis_pp.approx_eq(axis_pp) {
                return Err(Error::NonUniformBatch {
                    reason: "measurement axes vary across the batch".into(),
                });
            }
            if indices.last().is_some_and(|&last| pair.pair_index <= last) {
                return Err(Error::NonUniformBatch {
                    reason: "pair indices are not strictly ascending".into(),
                });
            }
            indices.push(pair.pair_index);
            outcomes_p.push(pair.outcome_p.value());
            outcomes_pp.push(pair.outcome_pp.value());
            first_p.push(pair.first_measured == Side::P);
        }
        let family = self.families.len();
        self.families.push(FamilyRecord::Batch {
            name: name.to_owned(),
            model,
            indices: IndexSet::explicit(indices),
            axis_p,
            axis_pp,
            outcomes_p,
            outcomes_pp,
            first_p,
        });
        let p = self.insert_column(
            ColumnId(format!("{name}/p")),
            ColumnRef { family, side: Side::P, role: ColumnRole::Actual },
        )?;
        let pp = self.insert_column(
            ColumnId(format!("{name}/p'")),
            ColumnRef { family, side: Side::PPrime, role: ColumnRole::Actual },
        )?;
        Ok((p, pp))
    }

    /// Registers one counterfactual table together with the pairs it was
    /// filled from; returns one column id per axis-set position and side.
    ///
    /// The table must be row-aligned with the pairs, share one axis set and
    /// mode, keep the actually measured axes at fixed positions, and repeat
    /// the recorded outcomes in its actual cells.
    pub fn register_mcd_batch(
        &mut self,
        name: &str,
        pairs: &[SingletPair],
        records: &[CounterfactualRecord],
    ) -> Result<McdColumns> {
        if pairs.is_empty() || pairs.len() != records.len() {
            return Err(Error::NonUniformBatch {
                reason: format!(
                    "need equal non-zero counts, got {} pairs and {} records",
                    pairs.len(),
                    records.len()
                ),
            });
        }
        let head = &records[0];
        let axis_set = head.axis_set.clone();
        let (actual_p, actual_pp) = (head.actual_p, head.actual_pp);
        let mode = head.mode;
        let k = axis_set.len();
        let mut indices = Vec::with_capacity(records.len());
        let mut first_p = Vec::with_capacity(records.len());
        let mut cells_p = Vec::with_capacity(records.len() * k);
        let mut cells_pp = Vec::with_capacity(records.len() * k);
        for (pair, rec) in pairs.iter().zip(records) {
            let aligned = rec.pair_index == pair.pair_index
                && rec.mode == mode
                && rec.actual_p == actual_p
                && rec.actual_pp == actual_pp
                && rec.axis_set.len() == k
                && rec.axis_set.iter().zip(&axis_set).all(|(a, b)| a.approx_eq(*b))
                && axis_set[actual_p].approx_eq(pair.axis_p)
                && axis_set[actual_pp].approx_eq(pair.axis_pp)
                && rec.values_p[actual_p] == pair.outcome_p
                && rec.values_pp[actual_pp] == pair.outcome_pp;
            if !aligned {
                return Err(Error::NonUniformBatch {
                    reason: format!("record for pair {} does not match its pair", pair.pair_index),
                });
            }
            if indices.last().is_some_and(|&last| pair.pair_index <= last) {
                return Err(Error::NonUniformBatch {
                    reason: "pair indices are not strictly ascending".into(),
                });
            }
            indices.push(pair.pair_index);
            first_p.push(pair.first_measured == Side::P);
            cells_p.extend(rec.values_p.iter().map(|o| o.value()));
            cells_pp.extend(rec.values_pp.iter().map(|o| o.value()));
        }
        let family = self.families.len();
        self.families.push(FamilyRecord::McdTable {
            name: name.to_owned(),
            mode,
            indices: IndexSet::explicit(indices),
            axis_set: axis_set.clone(),
            actual_p,
            actual_pp,
            first_p,
            cells_p,
            cells_pp,
        });
        let mut p = Vec::with_capacity(k);
        let mut pp = Vec::with_capacity(k);
        for (j, side, out) in
            (0..k).flat_map(|j| [(j, Side::P, 0usize), (j, Side::PPrime, 1usize)])
        {
            let id = ColumnId(format!("{name}/{}/a{j}", side.label()));
            let id = self.insert_column(id, ColumnRef { family, side, role: ColumnRole::Cell(j) })?;
            if out == 0 {
                p.push(id);
            } else {
                pp.push(id);
            }
        }
        Ok(McdColumns { axis_set, p, pp, actual_p, actual_pp })
    }

    /// Registers ingested sign columns sharing one row alignment. Returns
    /// ids `"{name}/{label}"` in the given order.
    pub fn register_external(
        &mut self,
        name: &str,
        indices: IndexSet,
        columns: &[(String, Vec<Outcome>)],
    ) -> Result<Vec<ColumnId>> {
        if columns.is_empty() || indices.is_empty() {
            return Err(Error::NonUniformBatch { reason: "empty external table".into() });
        }
        for (label, values) in columns {
            if values.len() != indices.len() {
                return Err(Error::NonUniformBatch {
                    reason: format!(
                        "column {label:?} has {} values for {} rows",
                        values.len(),
                        indices.len()
                    ),
                });
            }
        }
        let family = self.families.len();
        self.families.push(FamilyRecord::External {
            name: name.to_owned(),
            indices,
            values: columns
                .iter()
                .map(|(_, v)| v.iter().map(|o| o.value()).collect())
                .collect(),
        });
        let mut ids = Vec::with_capacity(columns.len());
        for (k, (label, _)) in columns.iter().enumerate() {
            ids.push(self.insert_column(
                ColumnId(format!("{name}/{label}")),
                ColumnRef { family, side: Side::P, role: ColumnRole::External(k) },
            )?);
        }
        Ok(ids)
    }
}

/// One preparation claim during the per-row scan.
#[derive(Debug, Clone, Copy)]
struct Claim<'a> {
    axis: Axis,
    from: u64,
    until: u64,
    source: ClaimSrc<'a>,
}

#[derive(Debug, Clone, Copy)]
enum ClaimSrc<'a> {
    Actual(&'a ColumnId),
    Collapse,
    Cell(&'a ColumnId),
    Pairing(&'a ColumnId),
    Substitution(&'a ColumnId),
}

impl ClaimSrc<'_> {
    fn materialize(self) -> PrepSource {
        match self {
            ClaimSrc::Actual(c) => PrepSource::ActualMeasurement { column: c.clone() },
            ClaimSrc::Collapse => PrepSource::PartnerCollapse,
            ClaimSrc::Cell(c) => PrepSource::CounterfactualCell { column: c.clone() },
            ClaimSrc::Pairing(c) => PrepSource::PairingCollapse { column: c.clone() },
            ClaimSrc::Substitution(c) => PrepSource::Substitution { column: c.clone() },
        }
    }
}

fn claims_conflict(a: &Claim<'_>, b: &Claim<'_>) -> bool {
    a.from.max(b.from) < a.until.min(b.until) && !a.axis.approx_eq(b.axis)
}

/// Pushes the preparations the recorded history actually gave this
/// particle. The pre-measurement source state is unpolarized and can never
/// conflict, so it is omitted.
fn push_actual_claims<'a>(
    family: &FamilyRecord,
    side: Side,
    row: usize,
    own_column: &'a ColumnId,
    claims: &mut Vec<Claim<'a>>,
) {
    let own_tick = if family.measured_first(side, row) { PAIR_FIRST_TICK } else { PAIR_SECOND_TICK };
    let own_axis = family.actual_axis(side).expect("pair families have actual axes");
    let own_value = Outcome::try_from(family.actual_value(side, row)).unwrap();
    claims.push(Claim {
        axis: own_axis.oriented(own_value),
        from: own_tick,
        until: PAIR_HORIZON_TICK,
        source: ClaimSrc::Actual(own_column),
    });
    if own_tick == PAIR_SECOND_TICK {
        let partner = side.other();
        let partner_axis = family.actual_axis(partner).unwrap();
        let partner_value = Outcome::try_from(family.actual_value(partner, row)).unwrap();
        claims.push(Claim {
            axis: partner_axis.reversed().oriented(partner_value),
            from: PAIR_FIRST_TICK,
            until: PAIR_SECOND_TICK,
            source: ClaimSrc::Collapse,
        });
    }
}

fn record_conflicts(
    claims: &[Claim<'_>],
    pair_index: u64,
    side: Side,
    offending: &mut Vec<u64>,
    conflicts: &mut Vec<PrepConflict>,
) -> bool {
    let mut any = false;
    for (i, a) in claims.iter().enumerate() {
        for b in &claims[i + 1..] {
            if claims_conflict(a, b) {
                any = true;
                if conflicts.len() < MAX_CONFLICT_SAMPLES {
                    conflicts.push(PrepConflict {
                        pair_index,
                        side,
                        first: ImputedPrep {
                            axis: a.axis,
                            from_tick: a.from,
                            until_tick: a.until,
                            source: a.source.materialize(),
                        },
                        second: ImputedPrep {
                            axis: b.axis,
                            from_tick: b.from,
                            until_tick: b.until,
                            source: b.source.materialize(),
                        },
                    });
                }
            }
        }
    }
    if any && offending.last() != Some(&pair_index) {
        offending.push(pair_index);
    }
    any
}

/// A column used by some term, resolved against the ledger.
struct Usage<'a> {
    column: &'a ColumnId,
    col: &'a ColumnRef,
    term_indices: &'a IndexSet,
}

/// Whether this column repeats the recorded measurement (directly, or as
/// the actual-axis cell of a table, which registration checked is equal).
fn effectively_actual(family: &FamilyRecord, col: &ColumnRef) -> bool {
    match col.role {
        ColumnRole::Actual => true,
        ColumnRole::Cell(j) => family.actual_position(col.side) == Some(j),
        ColumnRole::External(_) => false,
    }
}

/// Classifies the data lineage of a set of correlation terms.
///
/// Every term's two columns must be registered and its index set covered by
/// their rows. The verdict is a pure function of the ledger and the terms.
pub fn audit_abi(terms: &[CorrelationEstimate], ledger: &ProvenanceLedger) -> Result<AuditVerdict> {
    assert!(!terms.is_empty(), "audit needs at least one term");
    let mut details = Vec::new();
    let mut usages: Vec<(usize, Usage<'_>, Usage<'_>)> = Vec::new();
    for (t, term) in terms.iter().enumerate() {
        let prov = term.provenance();
        let mut resolved = Vec::with_capacity(2);
        for column in &prov.columns {
            let (family, col) = ledger.resolve(column)?;
            if !prov.indices.is_subset(family.indices()) {
                return Err(Error::IndicesNotCovered { column: column.0.clone() });
            }
            resolved.push((family, Usage { column, col, term_indices: &prov.indices }));
        }
        let (b, ub) = resolved.pop().unwrap();
        let (a, ua) = resolved.pop().unwrap();
        details.push(format!(
            "term {t}: <{}, {}> over {} rows of {}{}",
            ua.column,
            ub.column,
            prov.indices.len(),
            a.name(),
            if std::ptr::eq(a, b) { String::new() } else { format!(" and {}", b.name()) },
        ));
        usages.push((t, ua, ub));
    }

    let mut offending: Vec<u64> = Vec::new();
    let mut conflicts: Vec<PrepConflict> = Vec::new();
    for (f, family) in ledger.families.iter().enumerate() {
        if !family.has_prep_semantics() {
            continue;
        }
        // Counterfactual cells beyond the actual axis each impute a
        // preparation; pairings where either side is such a cell impute a
        // collapse onto the partner. Purely actual usages restate the
        // recorded history, which is consistent by construction, so rows
        // are only scanned when an imputing usage exists.
        let mut cell_usages: Vec<&Usage<'_>> = Vec::new();
        let mut pairings: Vec<(&Usage<'_>, &Usage<'_>)> = Vec::new();
        for (_, ua, ub) in &usages {
            for u in [ua, ub] {
                if u.col.family == f && !effectively_actual(family, u.col) {
                    cell_usages.push(u);
                }
            }
            if ua.col.family == f
                && ub.col.family == f
                && ua.col.side != ub.col.side
                && !(effectively_actual(family, ua.col) && effectively_actual(family, ub.col))
            {
                pairings.push((ua, ub));
            }
        }
        if cell_usages.is_empty() && pairings.is_empty() {
            continue;
        }
        let fallback = ColumnId::new(family.name());
        let actual_id = |side: Side| -> &ColumnId {
            ledger
                .columns
                .iter()
                .find(|(_, c)| c.family == f && c.side == side && effectively_actual(family, c))
                .map(|(id, _)| id)
                .unwrap_or(&fallback)
        };
        let actual_ids = [actual_id(Side::P), actual_id(Side::PPrime)];
        let indices = family.indices();
        let mut claims: Vec<Claim<'_>> = Vec::with_capacity(8);
        for row in 0..indices.len() {
            let index = indices.at(row);
            for side in [Side::P, Side::PPrime] {
                claims.clear();
                let mut touched = false;
                for u in &cell_usages {
                    if u.col.side == side && u.term_indices.contains(index) {
                        let ColumnRole::Cell(j) = u.col.role else { unreachable!() };
                        claims.push(Claim {
                            axis: family
                                .column_axis(u.col)
                                .unwrap()
                                .oriented(Outcome::try_from(family.cell_value(side, row, j)).unwrap()),
                            from: if family.measured_first(side, row) {
                                PAIR_FIRST_TICK
                            } else {
                                PAIR_SECOND_TICK
                            },
                            until: PAIR_HORIZON_TICK,
                            source: ClaimSrc::Cell(u.column),
                        });
                        touched = true;
                    }
                }
                // Evaluating a cross-side term as a collapse chain makes the
                // second-measured particle carry the reversed partner axis.
                if !family.measured_first(side, row) {
                    for (ua, ub) in &pairings {
                        let (own, other) = if ua.col.side == side { (ua, ub) } else { (ub, ua) };
                        if own.term_indices.contains(index) {
                            let other_axis = family.column_axis(other.col).unwrap();
                            let other_value =
                                Outcome::try_from(family.column_value(other.col, row)).unwrap();
                            claims.push(Claim {
                                axis: other_axis.reversed().oriented(other_value),
                                from: PAIR_FIRST_TICK,
                                until: PAIR_SECOND_TICK,
                                source: ClaimSrc::Pairing(other.column),
                            });
                            touched = true;
                        }
                    }
                }
                if !touched {
                    continue;
                }
                // The recorded history is always in force alongside any use.
                push_actual_claims(family, side, row, actual_ids[side as usize], &mut claims);
                record_conflicts(&claims, index, side, &mut offending, &mut conflicts);
            }
        }
    }
    offending.sort_unstable();
    offending.dedup();

    let classification = if !offending.is_empty() {
        details.push(format!(
            "{} rows require one particle to hold two different preparations at once",
            offending.len()
        ));
        Classification::MixedPreparation
    } else {
        classify_clean(terms, &usages, ledger, &mut details)
    };
    Ok(AuditVerdict { classification, details, offending_indices: offending, conflicts })
}

/// Classification when no row-level conflicts exist: identical rows from
/// one family are a single sample; anything else is multi-sample.
fn classify_clean(
    terms: &[CorrelationEstimate],
    usages: &[(usize, Usage<'_>, Usage<'_>)],
    ledger: &ProvenanceLedger,
    details: &mut Vec<String>,
) -> Classification {
    let first_family = usages[0].1.col.family;
    let one_family = usages
        .iter()
        .all(|(_, ua, ub)| ua.col.family == first_family && ub.col.family == first_family);
    let first_indices = &terms[0].provenance().indices;
    let same_rows = terms.iter().all(|t| t.provenance().indices.set_eq(first_indices));
    if one_family && same_rows {
        details.push(format!(
            "all terms draw the same rows from {}: one sample per row",
            ledger.families[first_family].name()
        ));
        return Classification::SingleSample;
    }
    let pairwise_disjoint = (0..terms.len()).all(|i| {
        (i + 1..terms.len()).all(|j| {
            terms[i].provenance().indices.is_disjoint(&terms[j].provenance().indices)
        })
    });
    details.push(if pairwise_disjoint && terms.len() > 1 {
        "terms draw pairwise disjoint samples (one batch per term)".to_owned()
    } else {
        "terms draw from different families or partially shared rows".to_owned()
    });
    Classification::MultiSample
}

/// Report of a preparation-overlap scan over one particle's history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoplReport {
    /// Pairs of history positions whose states claim different axes over
    /// overlapping validity windows.
    pub violations: Vec<(usize, usize)>,
}

impl NoplReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Scans a time-sorted preparation history for two simultaneous distinct
/// preparations. Unpolarized states and same-oriented-axis overlaps pass.
pub fn nopl_check(history: &[PreparationState]) -> Result<NoplReport> {
    if history.windows(2).any(|w| w[1].valid_from < w[0].valid_from) {
        return Err(Error::UnsortedHistory);
    }
    let mut violations = Vec::new();
    for (i, a) in history.iter().enumerate() {
        for (offset, b) in history[i + 1..].iter().enumerate() {
            if b.valid_from.tick >= a.valid_until.tick {
                // Later states start even later; nothing more overlaps `a`.
                break;
            }
            if a.conflicts_with(b) {
                violations.push((i, i + 1 + offset));
            }
        }
    }
    Ok(NoplReport { violations })
}

/// Audits the identification of one particle's value along a second axis
/// with a stand-in column.
///
/// `own` must be the particle's recorded measurement column (along `a`).
/// `stand_in` supplies the claimed value along another axis `b`, either as
/// the partner's recorded column from the same batch (read through the
/// equal-axis conservation law, so `b` is the reverse of the partner's
/// axis) or as a counterfactual cell column for the same side of the same
/// table. The verdict reports, per row, whether treating both values as
/// belonging to one particle forces two distinct preparations.
pub fn locality_substitution_audit(
    own: &ColumnId,
    stand_in: &ColumnId,
    ledger: &ProvenanceLedger,
) -> Result<AuditVerdict> {
    let (own_family, own_col) = ledger.resolve(own)?;
    let (stand_family, stand_col) = ledger.resolve(stand_in)?;
    if !std::ptr::eq(own_family, stand_family) {
        return Err(Error::NotSubstitutionPair {
            reason: "columns come from different families".into(),
        });
    }
    let family = own_family;
    if !effectively_actual(family, own_col) {
        return Err(Error::NotSubstitutionPair {
            reason: "own column must be the recorded measurement".into(),
        });
    }

    // Establish the claimed axis and per-row claimed value for the
    // substituted measurement of the own-side particle.
    enum StandIn {
        PartnerConservation,
        TableCell(usize),
    }
    let arm = match family {
        FamilyRecord::Batch { .. } => {
            if stand_col.side == own_col.side {
                return Err(Error::NotSubstitutionPair {
                    reason: "batch stand-in must be the partner column".into(),
                });
            }
            StandIn::PartnerConservation
        }
        FamilyRecord::McdTable { .. } => {
            if stand_col.side != own_col.side {
                return Err(Error::NotSubstitutionPair {
                    reason: "table stand-in must be a cell column of the same side".into(),
                });
            }
            let ColumnRole::Cell(j) = stand_col.role else { unreachable!() };
            StandIn::TableCell(j)
        }
        FamilyRecord::External { .. } => {
            return Err(Error::NotSubstitutionPair {
                reason: "external columns carry no particle identity".into(),
            });
        }
    };

    let side = own_col.side;
    let mut details = vec![format!(
        "substituting {} for a second value of side {} measured by {}",
        stand_in,
        side.label(),
        own
    )];
    if !family.has_prep_semantics() {
        details.push(
            "hidden-state data: one state explains every axis, no preparation is imputed"
                .to_owned(),
        );
        return Ok(AuditVerdict::clean(Classification::SingleSample, details));
    }
    if let StandIn::TableCell(j) = arm {
        if family.actual_position(side) == Some(j) {
            details.push("stand-in is the actually measured axis: nothing new is claimed".into());
            return Ok(AuditVerdict::clean(Classification::SingleSample, details));
        }
    }

    let indices = family.indices();
    let mut offending = Vec::new();
    let mut conflicts = Vec::new();
    let mut claims: Vec<Claim<'_>> = Vec::with_capacity(4);
    for row in 0..indices.len() {
        let index = indices.at(row);
        claims.clear();
        push_actual_claims(family, side, row, own, &mut claims);
        let own_tick =
            if family.measured_first(side, row) { PAIR_FIRST_TICK } else { PAIR_SECOND_TICK };
        let (sub_axis, sub_value) = match arm {
            // Reading the partner's outcome along c as this particle's
            // value along reverse(c): exact anti-conservation across the
            // pair makes the orientations land together when the lines do.
            StandIn::PartnerConservation => {
                let partner_axis = family.actual_axis(side.other()).unwrap();
                let value = Outcome::try_from(family.actual_value(side.other(), row)).unwrap();
                (partner_axis.reversed(), value)
            }
            StandIn::TableCell(j) => {
                let axis = family.column_axis(stand_col).unwrap();
                let value = Outcome::try_from(family.cell_value(side, row, j)).unwrap();
                let _ = j;
                (axis, value)
            }
        };
        claims.push(Claim {
            axis: sub_axis.oriented(sub_value),
            from: own_tick,
            until: PAIR_HORIZON_TICK,
            source: ClaimSrc::Substitution(stand_in),
        });
        record_conflicts(&claims, index, side, &mut offending, &mut conflicts);
    }

    let classification = if offending.is_empty() {
        details.push("substituted values restate the recorded preparation on every row".into());
        Classification::SingleSample
    } else {
        details.push(format!(
            "{} of {} rows make side {} carry two preparations at once",
            offending.len(),
            indices.len(),
            side.label()
        ));
        Classification::MixedPreparation
    };
    Ok(AuditVerdict { classification, details, offending_indices: offending, conflicts })
}
