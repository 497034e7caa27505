//! Correlation estimators and the averaged-product inequalities over them.
//!
//! A [`CorrelationEstimate`] is the empirical mean of elementwise products
//! of two sign columns. It keeps the integer product sum, so equal-length
//! terms evaluate through exact integer arithmetic; a combination whose
//! per-row value never exceeds the bound then never exceeds it after
//! averaging, down to the last bit.
//!
//! Two inequality shapes are supported:
//!
//! * [`AbiKind::V4`]: `|c(x,y) + c(x,z)| + |c(w,y) - c(w,z)| <= 2`
//! * [`AbiKind::V3`]: `|c(x,y) - c(x,z)| + c(y,z) <= 1`
//!
//! Both hold for any single table of +/-1 values because the corresponding
//! per-row sign expressions are identically equal to the bound (see
//! [`v4_pointwise`] and [`v3_pointwise`]); their averaged forms follow by
//! the triangle inequality. Nothing about physics enters: violations can
//! only come from combining estimates that no single table produced, which
//! is what [`audit_abi`] diagnoses.

use crate::audit::{audit_abi, AuditVerdict, ColumnId, IndexSet, ProvenanceLedger};
use crate::error::{Error, Result};
use crate::outcome::Outcome;

/// Where an estimate's two columns came from and which rows were used.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    /// Left and right column ids, in the order passed to [`correlate`].
    pub columns: [ColumnId; 2],
    pub indices: IndexSet,
}

impl Provenance {
    pub fn new(left: ColumnId, right: ColumnId, indices: IndexSet) -> Provenance {
        Provenance { columns: [left, right], indices }
    }

    /// Placeholder provenance for `n` rows of unregistered data. Estimates
    /// built with it still evaluate, but cannot be audited.
    pub fn anonymous(n: u64) -> Provenance {
        Provenance::new(
            ColumnId::new("anonymous/left"),
            ColumnId::new("anonymous/right"),
            IndexSet::range(0, n),
        )
    }
}

/// One recorded point of a running mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// Number of rows included so far.
    pub n: u64,
    /// Running mean over those rows.
    pub value: f64,
}

/// Empirical correlation of two sign columns.
///
/// Stores the integer product sum; `value()` is the single rounding step.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    sum: i64,
    n: u64,
    provenance: Provenance,
    history: Option<Vec<TracePoint>>,
}

impl CorrelationEstimate {
    pub fn value(&self) -> f64 {
        self.sum as f64 / self.n as f64
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Exact integer sum of the elementwise products.
    pub fn sum(&self) -> i64 {
        self.sum
    }

    /// Standard error of the mean of +/-1 products.
    pub fn stderr(&self) -> f64 {
        let v = self.value();
        ((1.0 - v * v).max(0.0) / self.n as f64).sqrt()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Running-mean trace, present only for [`correlate_traced`] estimates.
    pub fn history(&self) -> Option<&[TracePoint]> {
        self.history.as_deref()
    }
}

fn check_inputs(xs: &[Outcome], ys: &[Outcome], provenance: &Provenance) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.is_empty() {
        return Err(Error::EmptyColumns);
    }
    if provenance.indices.len() != xs.len() {
        return Err(Error::ProvenanceMismatch { indices: provenance.indices.len(), len: xs.len() });
    }
    Ok(())
}

/// Correlates two equal-length sign columns.
pub fn correlate(
    xs: &[Outcome],
    ys: &[Outcome],
    provenance: Provenance,
) -> Result<CorrelationEstimate> {
    check_inputs(xs, ys, &provenance)?;
    let sum = xs.iter().zip(ys).map(|(x, y)| i64::from(x.product(*y))).sum();
    Ok(CorrelationEstimate { sum, n: xs.len() as u64, provenance, history: None })
}

/// Like [`correlate`], additionally retaining a running-mean trace of at
/// most `max_points` intermediate points plus the final one.
pub fn correlate_traced(
    xs: &[Outcome],
    ys: &[Outcome],
    provenance: Provenance,
    max_points: usize,
) -> Result<CorrelationEstimate> {
    check_inputs(xs, ys, &provenance)?;
    assert!(max_points > 0, "trace needs at least one point");
    let n = xs.len();
    let stride = n.div_ceil(max_points).max(1);
    let mut sum: i64 = 0;
    let mut history = Vec::with_capacity(n / stride + 1);
    for (k, (x, y)) in xs.iter().zip(ys).enumerate() {
        sum += i64::from(x.product(*y));
        let count = k + 1;
        if count % stride == 0 || count == n {
            history.push(TracePoint { n: count as u64, value: sum as f64 / count as f64 });
        }
    }
    Ok(CorrelationEstimate { sum, n: n as u64, provenance, history: Some(history) })
}

/// Combines two estimates of the same column pair over disjoint rows.
/// Integer sums add, so chunked and whole-column evaluation agree exactly.
/// Traces are not merged.
pub fn merge(a: &CorrelationEstimate, b: &CorrelationEstimate) -> Result<CorrelationEstimate> {
    if a.provenance.columns != b.provenance.columns {
        return Err(Error::MergeIncompatible {
            reason: "estimates correlate different column pairs".into(),
        });
    }
    if !a.provenance.indices.is_disjoint(&b.provenance.indices) {
        return Err(Error::MergeIncompatible { reason: "estimates share rows".into() });
    }
    Ok(CorrelationEstimate {
        sum: a.sum + b.sum,
        n: a.n + b.n,
        provenance: Provenance {
            columns: a.provenance.columns.clone(),
            indices: a.provenance.indices.union(&b.provenance.indices),
        },
        history: None,
    })
}

/// Convergence summary extracted from a running-mean trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub points: Vec<TracePoint>,
    /// Smallest recorded `n` from which every later recorded mean stays
    /// within `band` of the final value.
    pub stabilization_n: u64,
    pub band: f64,
    pub final_value: f64,
}

/// Reports when the running mean settled into `final_value +/- band`.
pub fn convergence_trace(
    estimate: &CorrelationEstimate,
    band: f64,
) -> Result<ConvergenceReport> {
    assert!(band >= 0.0 && band.is_finite(), "band must be a finite non-negative width");
    let points = estimate.history.as_ref().ok_or(Error::HistoryNotRetained)?;
    let final_value = estimate.value();
    let last_outside = points
        .iter()
        .rposition(|p| (p.value - final_value).abs() > band);
    let stabilization_n = match last_outside {
        // The final point sits at distance zero, so `i + 1` always exists.
        Some(i) => points[i + 1].n,
        None => points.first().map_or(estimate.n, |p| p.n),
    };
    Ok(ConvergenceReport { points: points.clone(), stabilization_n, band, final_value })
}

/// The two supported averaged-product inequality shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AbiKind {
    /// Three terms over axes `x, y, z`; bound 1.
    V3,
    /// Four terms over axes `x, w, y, z`; bound 2.
    V4,
}

impl AbiKind {
    pub fn bound(self) -> f64 {
        match self {
            AbiKind::V3 => 1.0,
            AbiKind::V4 => 2.0,
        }
    }

    pub fn term_count(self) -> usize {
        match self {
            AbiKind::V3 => 3,
            AbiKind::V4 => 4,
        }
    }
}

impl std::fmt::Display for AbiKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AbiKind::V3 => "V3",
            AbiKind::V4 => "V4",
        })
    }
}

/// Per-row sign expression of the four-term inequality. Identically 2.
pub fn v4_pointwise(x: i8, y: i8, z: i8, w: i8) -> i32 {
    let (x, y, z, w) = (i32::from(x), i32::from(y), i32::from(z), i32::from(w));
    (x * y + x * z).abs() + (w * y - w * z).abs()
}

/// Per-row sign expression of the three-term inequality. Identically 1.
pub fn v3_pointwise(x: i8, y: i8, z: i8) -> i32 {
    let (x, y, z) = (i32::from(x), i32::from(y), i32::from(z));
    (x * y - x * z).abs() + y * z
}

/// Left-hand side of the inequality over the given terms (V4 order:
/// `c(x,y), c(x,z), c(w,y), c(w,z)`; V3 order: `c(x,y), c(x,z), c(y,z)`).
///
/// When every term has the same row count the combination reduces to one
/// integer expression divided once by `n`; a table whose integer value
/// never exceeds `bound * n` then never reports a float above `bound`.
/// Mixed row counts fall back to combining the per-term means.
pub fn lhs_value(kind: AbiKind, terms: &[CorrelationEstimate]) -> f64 {
    assert_eq!(terms.len(), kind.term_count(), "wrong number of terms for {kind}");
    let n = terms[0].n;
    if terms.iter().all(|t| t.n == n) {
        let s: Vec<i64> = terms.iter().map(|t| t.sum).collect();
        let numerator = match kind {
            AbiKind::V4 => (s[0] + s[1]).abs() + (s[2] - s[3]).abs(),
            AbiKind::V3 => (s[0] - s[1]).abs() + s[2],
        };
        return numerator as f64 / n as f64;
    }
    let v: Vec<f64> = terms.iter().map(CorrelationEstimate::value).collect();
    match kind {
        AbiKind::V4 => (v[0] + v[1]).abs() + (v[2] - v[3]).abs(),
        AbiKind::V3 => (v[0] - v[1]).abs() + v[2],
    }
}

/// Three-sigma allowance for finite-sample scatter of the combined terms.
pub fn statistical_slack(terms: &[CorrelationEstimate]) -> f64 {
    3.0 * terms.iter().map(|t| t.stderr().powi(2)).sum::<f64>().sqrt()
}

/// Result of evaluating one averaged-product inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct AbiReport {
    pub kind: AbiKind,
    pub terms: Vec<CorrelationEstimate>,
    pub lhs_value: f64,
    pub bound: f64,
    pub statistical_slack: f64,
    /// `lhs_value <= bound + statistical_slack`.
    pub satisfied: bool,
    /// Data-lineage classification, present when a ledger was supplied.
    pub audit: Option<AuditVerdict>,
}

fn eval(
    kind: AbiKind,
    terms: Vec<CorrelationEstimate>,
    ledger: Option<&ProvenanceLedger>,
) -> Result<AbiReport> {
    let audit = ledger.map(|l| audit_abi(&terms, l)).transpose()?;
    let lhs = lhs_value(kind, &terms);
    let slack = statistical_slack(&terms);
    Ok(AbiReport {
        kind,
        lhs_value: lhs,
        bound: kind.bound(),
        statistical_slack: slack,
        satisfied: lhs <= kind.bound() + slack,
        audit,
        terms,
    })
}

/// Evaluates `|c(x,y) + c(x,z)| + |c(w,y) - c(w,z)| <= 2`, auditing the
/// terms' lineage when a ledger is supplied.
pub fn eval_v4(
    cxy: CorrelationEstimate,
    cxz: CorrelationEstimate,
    cwy: CorrelationEstimate,
    cwz: CorrelationEstimate,
    ledger: Option<&ProvenanceLedger>,
) -> Result<AbiReport> {
    eval(AbiKind::V4, vec![cxy, cxz, cwy, cwz], ledger)
}

/// Evaluates `|c(x,y) - c(x,z)| + c(y,z) <= 1`, auditing the terms'
/// lineage when a ledger is supplied.
pub fn eval_v3(
    cxy: CorrelationEstimate,
    cxz: CorrelationEstimate,
    cyz: CorrelationEstimate,
    ledger: Option<&ProvenanceLedger>,
) -> Result<AbiReport> {
    eval(AbiKind::V3, vec![cxy, cxz, cyz], ledger)
}

/// Exhaustively maximizes the per-row sign expression over all sign
/// assignments, independently of the closed-form bounds.
pub fn bound_oracle(kind: AbiKind) -> f64 {
    let signs = [-1i8, 1];
    let mut max = i32::MIN;
    match kind {
        AbiKind::V4 => {
            for x in signs {
                for y in signs {
                    for z in signs {
                        for w in signs {
                            max = max.max(v4_pointwise(x, y, z, w));
                        }
                    }
                }
            }
        }
        AbiKind::V3 => {
            for x in signs {
                for y in signs {
                    for z in signs {
                        max = max.max(v3_pointwise(x, y, z));
                    }
                }
            }
        }
    }
    f64::from(max)
}

/// Singlet-statistics prediction for the V4 left-hand side at the given
/// measurement angles (`x`, `w` on one side; `y`, `z` on the other).
pub fn singlet_v4_lhs(x: f64, w: f64, y: f64, z: f64) -> f64 {
    let c = |a: f64, b: f64| -(a - b).cos();
    (c(x, y) + c(x, z)).abs() + (c(w, y) - c(w, z)).abs()
}

/// Singlet-statistics prediction for the V3 left-hand side.
pub fn singlet_v3_lhs(x: f64, y: f64, z: f64) -> f64 {
    let c = |a: f64, b: f64| -(a - b).cos();
    (c(x, y) - c(x, z)).abs() + c(y, z)
}
