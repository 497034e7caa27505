//! Reading measurement data back from disk: event logs written by this
//! tool (or anything matching their layout) and plain sign tables.

use std::collections::BTreeMap;
use std::path::Path;

use bellsim_core::{
    audit_abi, correlate, eval_v3, eval_v4, AbiReport, ColumnId, CorrelationEstimate,
    IndexSet, Outcome, Provenance, ProvenanceLedger, Side,
};

use crate::config::{IngestArgs, IngestFormat, IngestKind};
use crate::output::{
    AbiEval, AuditSummary, EventRow, IngestSummary, RunOutput, Summary, TermSummary,
};
use crate::CliError;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "data".to_owned(), |s| s.to_string_lossy().into_owned())
}

fn side_from_label(label: &str) -> Option<Side> {
    match label {
        "p" => Some(Side::P),
        "p'" => Some(Side::PPrime),
        _ => None,
    }
}

#[derive(Debug, Default)]
struct IngestCounts {
    dropped_rows: u64,
    incomplete_pairs: u64,
    counterfactual_rows_skipped: u64,
}

/// One reconstructed two-column term plus its source counts.
struct PairTable {
    indices: Vec<u64>,
    xs: Vec<Outcome>,
    ys: Vec<Outcome>,
}

/// Reads one event log and regroups actual rows into per-pair outcomes.
///
/// Rows that fail to parse, carry a non-sign outcome, name an unknown side,
/// or repeat a side already seen for their pair are dropped and counted.
/// Counterfactual rows are skipped and counted separately; pairs that end up
/// with only one side are counted as incomplete.
fn read_events(path: &Path, counts: &mut IngestCounts) -> Result<PairTable, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::Reader::from_reader(file);
    let mut pairs: BTreeMap<u64, [Option<Outcome>; 2]> = BTreeMap::new();
    for record in reader.deserialize::<EventRow>() {
        let row = match record {
            Ok(row) => row,
            Err(e) => {
                if let csv::ErrorKind::Io(io) = e.into_kind() {
                    return Err(CliError::Io { path: path.to_path_buf(), source: io });
                }
                counts.dropped_rows += 1;
                continue;
            }
        };
        if row.counterfactual_flag != 0 {
            counts.counterfactual_rows_skipped += 1;
            continue;
        }
        let (Some(side), Ok(outcome)) =
            (side_from_label(&row.side), Outcome::try_from(row.outcome))
        else {
            counts.dropped_rows += 1;
            continue;
        };
        let slot = &mut pairs.entry(row.pair_index).or_default()[side as usize];
        if slot.is_some() {
            counts.dropped_rows += 1;
        } else {
            *slot = Some(outcome);
        }
    }
    let mut table = PairTable { indices: Vec::new(), xs: Vec::new(), ys: Vec::new() };
    for (index, sides) in pairs {
        match sides {
            [Some(x), Some(y)] => {
                table.indices.push(index);
                table.xs.push(x);
                table.ys.push(y);
            }
            _ => counts.incomplete_pairs += 1,
        }
    }
    if table.indices.is_empty() {
        return Err(config_err(format!("{}: no complete pairs to ingest", path.display())));
    }
    Ok(table)
}

fn events_term(path: &Path, counts: &mut IngestCounts) -> Result<CorrelationEstimate, CliError> {
    let PairTable { indices, xs, ys } = read_events(path, counts)?;
    let stem = file_stem(path);
    let provenance = Provenance::new(
        ColumnId::new(format!("{stem}/p")),
        ColumnId::new(format!("{stem}/p'")),
        IndexSet::explicit(indices),
    );
    Ok(correlate(&xs, &ys, provenance)?)
}

/// A labeled sign table: header row of column names, then one `+1`/`-1`
/// entry per column per row.
fn read_signs(path: &Path, counts: &mut IngestCounts) -> Result<Vec<(String, Vec<Outcome>)>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::Reader::from_reader(file);
    let labels: Vec<String> = reader
        .headers()
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    if labels.is_empty() {
        return Err(config_err(format!("{}: sign table has no columns", path.display())));
    }
    let mut columns: Vec<Vec<Outcome>> = vec![Vec::new(); labels.len()];
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                if let csv::ErrorKind::Io(io) = e.into_kind() {
                    return Err(CliError::Io { path: path.to_path_buf(), source: io });
                }
                counts.dropped_rows += 1;
                continue;
            }
        };
        let parsed: Option<Vec<Outcome>> = (record.len() == labels.len())
            .then(|| {
                record
                    .iter()
                    .map(|field| {
                        field
                            .trim()
                            .parse::<i8>()
                            .ok()
                            .and_then(|v| Outcome::try_from(v).ok())
                    })
                    .collect()
            })
            .flatten();
        match parsed {
            Some(values) => {
                for (column, value) in columns.iter_mut().zip(values) {
                    column.push(value);
                }
            }
            None => counts.dropped_rows += 1,
        }
    }
    if columns[0].is_empty() {
        return Err(config_err(format!("{}: no usable sign rows", path.display())));
    }
    Ok(labels.into_iter().zip(columns).collect())
}

fn infer_kind(requested: IngestKind, terms: usize, what: &str) -> Result<IngestKind, CliError> {
    if requested != IngestKind::Auto {
        return Ok(requested);
    }
    match terms {
        1 | 2 => Ok(IngestKind::Correlation),
        3 => Ok(IngestKind::V3),
        4 => Ok(IngestKind::V4),
        other => Err(config_err(format!(
            "cannot infer an expression from {other} {what}; pass --kind"
        ))),
    }
}

fn required_terms(kind: IngestKind) -> Option<usize> {
    match kind {
        IngestKind::Auto => None,
        IngestKind::Correlation => None,
        IngestKind::V3 => Some(3),
        IngestKind::V4 => Some(4),
    }
}

fn kind_label(kind: IngestKind) -> &'static str {
    match kind {
        IngestKind::Auto => "auto",
        IngestKind::Correlation => "correlation",
        IngestKind::V3 => "V3",
        IngestKind::V4 => "V4",
    }
}

/// Pairs of column positions feeding each term, in term order.
fn sign_term_wiring(kind: IngestKind) -> Vec<(usize, usize)> {
    match kind {
        // Columns are x, w, y, z.
        IngestKind::V4 => vec![(0, 2), (0, 3), (1, 2), (1, 3)],
        // Columns are x, y, z.
        IngestKind::V3 => vec![(0, 1), (0, 2), (1, 2)],
        IngestKind::Correlation => vec![(0, 1)],
        IngestKind::Auto => unreachable!("resolved before wiring"),
    }
}

fn evaluate(
    kind: IngestKind,
    terms: Vec<CorrelationEstimate>,
    ledger: Option<&ProvenanceLedger>,
) -> Result<Option<AbiReport>, CliError> {
    let report = match kind {
        IngestKind::V4 => {
            let [t0, t1, t2, t3]: [CorrelationEstimate; 4] =
                terms.try_into().map_err(|_| config_err("V4 needs four terms"))?;
            Some(eval_v4(t0, t1, t2, t3, ledger)?)
        }
        IngestKind::V3 => {
            let [t0, t1, t2]: [CorrelationEstimate; 3] =
                terms.try_into().map_err(|_| config_err("V3 needs three terms"))?;
            Some(eval_v3(t0, t1, t2, ledger)?)
        }
        _ => None,
    };
    Ok(report)
}

pub fn ingest(args: &IngestArgs) -> Result<RunOutput, CliError> {
    if args.files.is_empty() {
        return Err(config_err("ingest needs at least one input file"));
    }
    let mut counts = IngestCounts::default();
    let (kind, terms, ledger) = match args.format {
        IngestFormat::Events => {
            let kind = infer_kind(args.kind, args.files.len(), "event files")?;
            if let Some(required) = required_terms(kind) {
                if args.files.len() != required {
                    return Err(config_err(format!(
                        "{} needs {required} event files, got {}",
                        kind_label(kind),
                        args.files.len()
                    )));
                }
            }
            let mut terms = Vec::with_capacity(args.files.len());
            for path in &args.files {
                terms.push(events_term(path, &mut counts)?);
            }
            (kind, terms, None)
        }
        IngestFormat::Signs => {
            if args.files.len() != 1 {
                return Err(config_err("sign-table ingest takes exactly one file"));
            }
            let path = &args.files[0];
            let columns = read_signs(path, &mut counts)?;
            let kind = infer_kind(args.kind, columns.len(), "sign columns")?;
            let expected = required_terms(kind).unwrap_or(2);
            if columns.len() != expected {
                return Err(config_err(format!(
                    "{} needs {expected} sign columns, got {}",
                    kind_label(kind),
                    columns.len()
                )));
            }
            let n = columns[0].1.len() as u64;
            let indices = IndexSet::range(0, n);
            let mut ledger = ProvenanceLedger::new();
            let ids = ledger.register_external(&file_stem(path), indices.clone(), &columns)?;
            let terms = sign_term_wiring(kind)
                .into_iter()
                .map(|(left, right)| {
                    Ok(correlate(
                        &columns[left].1,
                        &columns[right].1,
                        Provenance::new(ids[left].clone(), ids[right].clone(), indices.clone()),
                    )?)
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            (kind, terms, Some(ledger))
        }
    };
    let report = evaluate(kind, terms.clone(), ledger.as_ref())?;
    let audit = match (&report, &ledger) {
        (Some(r), _) => r.audit.as_ref().map(AuditSummary::new),
        (None, Some(ledger)) => Some(AuditSummary::new(&audit_abi(&terms, ledger)?)),
        (None, None) => None,
    };
    let summary = IngestSummary {
        kind: kind_label(kind).to_owned(),
        format: match args.format {
            IngestFormat::Events => "events".to_owned(),
            IngestFormat::Signs => "signs".to_owned(),
        },
        files: args.files.iter().map(|p| p.display().to_string()).collect(),
        dropped_rows: counts.dropped_rows,
        incomplete_pairs: counts.incomplete_pairs,
        counterfactual_rows_skipped: counts.counterfactual_rows_skipped,
        terms: terms.iter().map(TermSummary::new).collect(),
        eval: report.as_ref().map(|r| AbiEval {
            kind: r.kind.to_string(),
            terms: r.terms.iter().map(TermSummary::new).collect(),
            lhs: r.lhs_value,
            bound: r.bound,
            statistical_slack: r.statistical_slack,
            satisfied: r.satisfied,
        }),
        audit,
    };
    let status = match &summary.eval {
        Some(eval) => format!(
            "ingested {} terms ({}); lhs {:.6} vs bound {}, satisfied: {}",
            summary.terms.len(),
            summary.kind,
            eval.lhs,
            eval.bound,
            eval.satisfied
        ),
        None => format!(
            "ingested {} correlation term(s); first value {:.6}",
            summary.terms.len(),
            summary.terms[0].value
        ),
    };
    Ok(RunOutput {
        summary: Summary::Ingest(summary),
        event_files: Vec::new(),
        ledger,
        status,
    })
}
