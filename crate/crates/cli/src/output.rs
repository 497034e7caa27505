//! Output schemas and writers: the event CSV rows, the summary JSON
//! document, and the on-disk layout of a run directory.
//!
//! Summaries carry no wall-clock or host data, so identical configurations
//! and seeds produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bellsim_core::{
    AuditVerdict, Classification, ConvergenceReport, CorrelationEstimate, CounterfactualRecord,
    IndexSet, ProvenanceLedger, Side, SingleParticleChain, SingletPair,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One measurement event, actual or counterfactual, as a CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub pair_index: u64,
    pub side: String,
    pub axis_angle: f64,
    pub time_tick: u64,
    pub outcome: i8,
    pub counterfactual_flag: u8,
}

fn pair_row(pair: &SingletPair, side: Side) -> EventRow {
    EventRow {
        pair_index: pair.pair_index,
        side: side.label().to_owned(),
        axis_angle: pair.axis(side).angle(),
        time_tick: pair.time(side).tick,
        outcome: pair.outcome(side).value(),
        counterfactual_flag: 0,
    }
}

/// Two rows per pair, first-measured side first.
pub fn pair_events(pairs: &[SingletPair]) -> Vec<EventRow> {
    let mut rows = Vec::with_capacity(pairs.len() * 2);
    for pair in pairs {
        let first = pair.first_measured;
        rows.push(pair_row(pair, first));
        rows.push(pair_row(pair, first.other()));
    }
    rows
}

/// Actual rows followed by counterfactual cell rows for each pair.
pub fn mcd_events(pairs: &[SingletPair], records: &[CounterfactualRecord]) -> Vec<EventRow> {
    let mut rows = Vec::new();
    for (pair, record) in pairs.iter().zip(records) {
        let first = pair.first_measured;
        rows.push(pair_row(pair, first));
        rows.push(pair_row(pair, first.other()));
        for side in [Side::P, Side::PPrime] {
            for (j, axis) in record.axis_set.iter().enumerate() {
                if record.is_actual(side, j) {
                    continue;
                }
                rows.push(EventRow {
                    pair_index: pair.pair_index,
                    side: side.label().to_owned(),
                    axis_angle: axis.angle(),
                    time_tick: pair.time(side).tick,
                    outcome: record.value(side, j).value(),
                    counterfactual_flag: 1,
                });
            }
        }
    }
    rows
}

/// One row per measurement of one chain; the chain index doubles as the
/// pair_index column.
pub fn chain_events(index: u64, chain: &SingleParticleChain) -> Vec<EventRow> {
    chain
        .axes
        .iter()
        .zip(&chain.outcomes)
        .zip(&chain.times)
        .map(|((axis, outcome), time)| EventRow {
            pair_index: index,
            side: Side::P.label().to_owned(),
            axis_angle: axis.angle(),
            time_tick: time.tick,
            outcome: outcome.value(),
            counterfactual_flag: 0,
        })
        .collect()
}

/// One estimate in a summary, with everything needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSummary {
    pub left_column: String,
    pub right_column: String,
    pub indices: IndexSet,
    pub n: u64,
    pub sum: i64,
    pub value: f64,
    pub stderr: f64,
}

impl TermSummary {
    pub fn new(est: &CorrelationEstimate) -> TermSummary {
        let prov = est.provenance();
        TermSummary {
            left_column: prov.columns[0].to_string(),
            right_column: prov.columns[1].to_string(),
            indices: prov.indices.clone(),
            n: est.n(),
            sum: est.sum(),
            value: est.value(),
            stderr: est.stderr(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub classification: Classification,
    pub offending_rows: u64,
    pub details: Vec<String>,
}

impl AuditSummary {
    pub fn new(verdict: &AuditVerdict) -> AuditSummary {
        AuditSummary {
            classification: verdict.classification,
            offending_rows: verdict.offending_indices.len() as u64,
            details: verdict.details.clone(),
        }
    }
}

/// One inequality evaluation: terms, combined value, and the decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbiEval {
    pub kind: String,
    pub terms: Vec<TermSummary>,
    pub lhs: f64,
    pub bound: f64,
    pub statistical_slack: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub band: f64,
    pub stabilization_n: u64,
    pub trace: Vec<(u64, f64)>,
}

impl ConvergenceSummary {
    pub fn new(report: &ConvergenceReport) -> ConvergenceSummary {
        ConvergenceSummary {
            band: report.band,
            stabilization_n: report.stabilization_n,
            trace: report.points.iter().map(|p| (p.n, p.value)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingletSummary {
    pub seed: u64,
    pub model: String,
    pub n: u64,
    pub angles: Vec<f64>,
    pub order: String,
    pub term: TermSummary,
    /// Model prediction for this angle gap.
    pub predicted: f64,
    pub audit: AuditSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub from_angle: f64,
    pub to_angle: f64,
    pub empirical: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub seed: u64,
    pub n: u64,
    pub angles: Vec<f64>,
    /// Products of consecutive outcomes against the same-particle law.
    pub steps: Vec<StepSummary>,
    /// First-to-third outcome product when three or more axes are given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip_step: Option<StepSummary>,
    /// Chains whose preparation history shows no overlapping distinct
    /// preparations (all of them, for generated data).
    pub nopl_passed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbiSummary {
    pub seed: u64,
    pub model: String,
    pub n_per_term: u64,
    pub angles: Vec<f64>,
    pub order: String,
    pub eval: AbiEval,
    /// Model prediction for the combined left-hand side.
    pub predicted_lhs: f64,
    pub audit: AuditSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McdSummary {
    pub seed: u64,
    pub model: String,
    pub n: u64,
    pub axis_set: Vec<f64>,
    pub order: String,
    pub conservation_enforced: bool,
    pub eval: AbiEval,
    pub audit: AuditSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsSummary {
    pub v3: f64,
    pub v4: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub kind: String,
    pub format: String,
    pub files: Vec<String>,
    pub dropped_rows: u64,
    pub incomplete_pairs: u64,
    pub counterfactual_rows_skipped: u64,
    pub terms: Vec<TermSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<AbiEval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub source: String,
    pub replayed_terms: u64,
    pub sums_match: bool,
    pub lhs_match: bool,
    pub classification_match: bool,
    pub classification: Classification,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recomputed_lhs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stored_lhs: Option<f64>,
}

impl ReplaySummary {
    pub fn matches(&self) -> bool {
        self.sums_match && self.lhs_match && self.classification_match
    }
}

/// Every summary document this tool writes, tagged by subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Summary {
    SingletRun(SingletSummary),
    ChainRun(ChainSummary),
    Chsh(AbiSummary),
    V3(AbiSummary),
    McdTable(McdSummary),
    BoundOracle(BoundsSummary),
    Ingest(IngestSummary),
    AuditReplay(ReplaySummary),
}

/// Top-level summary.json document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub library_version: String,
    #[serde(flatten)]
    pub summary: Summary,
}

impl SummaryFile {
    pub fn new(summary: Summary) -> SummaryFile {
        SummaryFile { library_version: bellsim_core::VERSION.to_owned(), summary }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("summaries always serialize");
        text.push('\n');
        text
    }
}

/// Everything a subcommand produced, ready to print or persist.
#[derive(Debug)]
pub struct RunOutput {
    pub summary: Summary,
    /// `(file name, rows)` event logs to write under the out dir.
    pub event_files: Vec<(String, Vec<EventRow>)>,
    pub ledger: Option<ProvenanceLedger>,
    /// One human-readable status line for out-dir mode.
    pub status: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn csv_io_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |source| match source.into_kind() {
        csv::ErrorKind::Io(io) => CliError::Io { path: path.to_path_buf(), source: io },
        other => CliError::Config(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_events_csv(path: &Path, rows: &[EventRow]) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row).map_err(csv_io_err(path))?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(text.as_bytes()).map_err(io_err(path))
}

/// Persists a run: event CSVs, `summary.json`, and `ledger.json`.
pub fn write_run(out_dir: &Path, output: &RunOutput) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for (name, rows) in &output.event_files {
        write_events_csv(&out_dir.join(name), rows)?;
    }
    let summary_path = out_dir.join("summary.json");
    write_text(&summary_path, &SummaryFile::new(output.summary.clone()).to_json())?;
    if let Some(ledger) = &output.ledger {
        let json =
            serde_json::to_string(ledger).expect("ledger serialization is infallible");
        write_text(&out_dir.join("ledger.json"), &json)?;
    }
    Ok(summary_path)
}
