//! Experiment execution: turns parsed arguments into summaries, event rows,
//! and ledgers. No file I/O happens here except in replay, which reads the
//! run directory it verifies.

use std::fs;
use std::path::Path;

use bellsim_core::rng::{rng_stream, stream_id, StreamKind, CHUNK_LEN};
use bellsim_core::{
    audit_abi, chain_two_step_correlation, convergence_trace, correlate, correlate_traced,
    eval_v3, eval_v4, generate_lhv_batch, generate_singlet_batch, lhs_value,
    lhv_correlation_exact, mcd_fill, measure_chain, nopl_check, AbiKind, AbiReport, Axis,
    ColumnId, CorrelationEstimate, CounterfactualRecord, IndexSet, McdMode, McdSource,
    ModelKind, Outcome, PairBatchSpec, Provenance, ProvenanceLedger, Side, SingletPair,
};

use crate::config::{order_name, AbiArgs, ChainArgs, McdArgs, ReplayArgs, SingletArgs};
use crate::output::{
    chain_events, mcd_events, pair_events, AbiEval, AbiSummary, AuditSummary, BoundsSummary,
    ChainSummary, ConvergenceSummary, McdSummary, ReplaySummary, RunOutput, SingletSummary,
    StepSummary, Summary, SummaryFile, TermSummary,
};
use crate::CliError;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn expect_angles(angles: &[f64], count: usize, what: &str) -> Result<(), CliError> {
    if angles.len() != count {
        return Err(config_err(format!(
            "{what} needs exactly {count} angles, got {}",
            angles.len()
        )));
    }
    Ok(())
}

/// Generates one batch of pairs under a pair-generation model.
fn generate_batch(
    model: ModelKind,
    spec: &PairBatchSpec,
    seed: u64,
) -> Result<Vec<SingletPair>, CliError> {
    match model {
        ModelKind::Qm => Ok(generate_singlet_batch(spec, seed)),
        ModelKind::LhvSign => {
            Ok(generate_lhv_batch(spec, seed).into_iter().map(|(_, p)| p).collect())
        }
        other => Err(config_err(format!(
            "{other} fills counterfactual tables; pair batches take qm or lhv_sign"
        ))),
    }
}

fn side_columns(pairs: &[SingletPair]) -> (Vec<Outcome>, Vec<Outcome>) {
    (
        pairs.iter().map(|p| p.outcome(Side::P)).collect(),
        pairs.iter().map(|p| p.outcome(Side::PPrime)).collect(),
    )
}

/// Model prediction for one cross-pair correlation at an angle gap.
fn predicted_correlation(model: ModelKind, a: f64, b: f64) -> f64 {
    match model {
        ModelKind::Qm => -(a - b).cos(),
        ModelKind::LhvSign => lhv_correlation_exact(a - b),
        _ => unreachable!("validated to a pair-generation model"),
    }
}

fn eval_summary(report: &AbiReport) -> AbiEval {
    AbiEval {
        kind: report.kind.to_string(),
        terms: report.terms.iter().map(TermSummary::new).collect(),
        lhs: report.lhs_value,
        bound: report.bound,
        statistical_slack: report.statistical_slack,
        satisfied: report.satisfied,
    }
}

pub fn singlet_run(args: &SingletArgs) -> Result<RunOutput, CliError> {
    expect_angles(&args.angles, 2, "singlet-run")?;
    if !(args.band > 0.0 && args.band.is_finite()) {
        return Err(config_err("--band must be a positive width"));
    }
    let (a, b) = (args.angles[0], args.angles[1]);
    let (n, seed) = (args.common.n, args.common.seed);
    let spec = PairBatchSpec {
        batch: 0,
        base_index: 0,
        n,
        axis_p: Axis::new(a),
        axis_pp: Axis::new(b),
        order: args.order.into(),
    };
    let pairs = generate_batch(args.model, &spec, seed)?;
    let mut ledger = ProvenanceLedger::new();
    let (col_p, col_pp) = ledger.register_singlet_batch("batch0", args.model, &pairs)?;
    let (xs, ys) = side_columns(&pairs);
    let provenance = Provenance::new(col_p, col_pp, IndexSet::range(0, n));
    let est = if args.retain_history {
        correlate_traced(&xs, &ys, provenance, 512)?
    } else {
        correlate(&xs, &ys, provenance)?
    };
    let verdict = audit_abi(std::slice::from_ref(&est), &ledger)?;
    let convergence = if args.retain_history {
        Some(ConvergenceSummary::new(&convergence_trace(&est, args.band)?))
    } else {
        None
    };
    let summary = SingletSummary {
        seed,
        model: args.model.to_string(),
        n,
        angles: args.angles.clone(),
        order: order_name(args.order).to_owned(),
        term: TermSummary::new(&est),
        predicted: predicted_correlation(args.model, a, b),
        audit: AuditSummary::new(&verdict),
        convergence,
    };
    let status = format!(
        "correlation {:.6} over {} pairs (predicted {:.6}); {}",
        est.value(),
        n,
        summary.predicted,
        verdict.classification
    );
    Ok(RunOutput {
        summary: Summary::SingletRun(summary),
        event_files: vec![("events.csv".to_owned(), pair_events(&pairs))],
        ledger: Some(ledger),
        status,
    })
}

pub fn chain_run(args: &ChainArgs) -> Result<RunOutput, CliError> {
    if args.angles.len() < 2 {
        return Err(config_err("chain-run needs at least two angles"));
    }
    let (n, seed) = (args.common.n, args.common.seed);
    let axes: Vec<Axis> = args.angles.iter().copied().map(Axis::new).collect();
    let mut chains = Vec::with_capacity(n as usize);
    let mut events = Vec::with_capacity((n as usize) * axes.len());
    for chunk in 0..n.div_ceil(CHUNK_LEN) {
        let mut stream = rng_stream(seed, stream_id(0, StreamKind::Outcome, chunk));
        for index in chunk * CHUNK_LEN..n.min((chunk + 1) * CHUNK_LEN) {
            let chain = measure_chain(None, &axes, &mut stream)?;
            events.extend(chain_events(index, &chain));
            chains.push(chain);
        }
    }
    let mut nopl_passed = 0;
    for chain in &chains {
        if nopl_check(&chain.preparation_history())?.passed() {
            nopl_passed += 1;
        }
    }
    let step_estimate = |i: usize, j: usize| -> Result<f64, CliError> {
        let xs: Vec<Outcome> = chains.iter().map(|c| c.outcomes[i]).collect();
        let ys: Vec<Outcome> = chains.iter().map(|c| c.outcomes[j]).collect();
        Ok(correlate(&xs, &ys, Provenance::anonymous(n))?.value())
    };
    let mut steps = Vec::new();
    for i in 0..axes.len() - 1 {
        steps.push(StepSummary {
            from_angle: args.angles[i],
            to_angle: args.angles[i + 1],
            empirical: step_estimate(i, i + 1)?,
            // Re-measuring one particle follows the cosine of the gap.
            predicted: (args.angles[i] - args.angles[i + 1]).cos(),
        });
    }
    let skip_step = if axes.len() >= 3 {
        Some(StepSummary {
            from_angle: args.angles[0],
            to_angle: args.angles[2],
            empirical: step_estimate(0, 2)?,
            predicted: chain_two_step_correlation(axes[0], axes[1], axes[2]),
        })
    } else {
        None
    };
    let summary = ChainSummary {
        seed,
        n,
        angles: args.angles.clone(),
        steps,
        skip_step,
        nopl_passed,
    };
    let status = format!(
        "{n} chains along {} axes; preparation audit passed {nopl_passed}/{n}",
        axes.len()
    );
    Ok(RunOutput {
        summary: Summary::ChainRun(summary),
        event_files: vec![("events.csv".to_owned(), events)],
        ledger: None,
        status,
    })
}

/// Axis pairs measured per term, in term order.
fn term_axes(kind: AbiKind, angles: &[f64]) -> Vec<(f64, f64)> {
    match kind {
        AbiKind::V4 => {
            let (x, w, y, z) = (angles[0], angles[1], angles[2], angles[3]);
            vec![(x, y), (x, z), (w, y), (w, z)]
        }
        AbiKind::V3 => {
            let (x, y, z) = (angles[0], angles[1], angles[2]);
            vec![(x, y), (x, z), (y, z)]
        }
    }
}

fn combined_prediction(kind: AbiKind, p: &[f64]) -> f64 {
    match kind {
        AbiKind::V4 => (p[0] + p[1]).abs() + (p[2] - p[3]).abs(),
        AbiKind::V3 => (p[0] - p[1]).abs() + p[2],
    }
}

pub fn abi_run(kind: AbiKind, args: &AbiArgs) -> Result<RunOutput, CliError> {
    let angles = match &args.angles {
        Some(a) => a.clone(),
        None => match kind {
            AbiKind::V4 => crate::config::CHSH_PRESET.to_vec(),
            AbiKind::V3 => crate::config::V3_PRESET.to_vec(),
        },
    };
    let what = match kind {
        AbiKind::V4 => "chsh (x, w, y, z)",
        AbiKind::V3 => "v3 (x, y, z)",
    };
    expect_angles(&angles, kind.term_count(), what)?;
    let (n, seed) = (args.common.n, args.common.seed);
    let mut ledger = ProvenanceLedger::new();
    let mut terms = Vec::new();
    let mut predictions = Vec::new();
    let mut event_files = Vec::new();
    for (k, (a, b)) in term_axes(kind, &angles).into_iter().enumerate() {
        let spec = PairBatchSpec {
            batch: k as u32,
            base_index: k as u64 * n,
            n,
            axis_p: Axis::new(a),
            axis_pp: Axis::new(b),
            order: args.order.into(),
        };
        let pairs = generate_batch(args.model, &spec, seed)?;
        let (col_p, col_pp) =
            ledger.register_singlet_batch(&format!("term{k}"), args.model, &pairs)?;
        let (xs, ys) = side_columns(&pairs);
        let indices = IndexSet::range(spec.base_index, spec.base_index + n);
        terms.push(correlate(&xs, &ys, Provenance::new(col_p, col_pp, indices))?);
        predictions.push(predicted_correlation(args.model, a, b));
        event_files.push((format!("term{k}.csv"), pair_events(&pairs)));
    }
    let report = match kind {
        AbiKind::V4 => {
            let [t0, t1, t2, t3]: [CorrelationEstimate; 4] =
                terms.try_into().expect("four terms");
            eval_v4(t0, t1, t2, t3, Some(&ledger))?
        }
        AbiKind::V3 => {
            let [t0, t1, t2]: [CorrelationEstimate; 3] = terms.try_into().expect("three terms");
            eval_v3(t0, t1, t2, Some(&ledger))?
        }
    };
    let verdict = report.audit.as_ref().expect("a ledger was supplied");
    let summary = AbiSummary {
        seed,
        model: args.model.to_string(),
        n_per_term: n,
        angles,
        order: order_name(args.order).to_owned(),
        eval: eval_summary(&report),
        predicted_lhs: combined_prediction(kind, &predictions),
        audit: AuditSummary::new(verdict),
    };
    let status = format!(
        "{} lhs {:.6} vs bound {} (slack {:.6}), satisfied: {}; {}",
        report.kind,
        report.lhs_value,
        report.bound,
        report.statistical_slack,
        report.satisfied,
        verdict.classification
    );
    let summary = match kind {
        AbiKind::V4 => Summary::Chsh(summary),
        AbiKind::V3 => Summary::V3(summary),
    };
    Ok(RunOutput { summary, event_files, ledger: Some(ledger), status })
}

pub fn mcd_run(args: &McdArgs) -> Result<RunOutput, CliError> {
    if args.axis_set.len() < 2 {
        return Err(config_err("--axis-set needs at least the two measured axes"));
    }
    let mode = match args.model {
        ModelKind::McdLhv => McdMode::Lhv,
        ModelKind::McdQmCollapse => McdMode::QmCollapse,
        other => {
            return Err(config_err(format!(
                "{other} generates pair batches; tables take mcd_lhv or mcd_qm_collapse"
            )))
        }
    };
    let (n, seed) = (args.common.n, args.common.seed);
    let axis_set: Vec<Axis> = args.axis_set.iter().copied().map(Axis::new).collect();
    let spec = PairBatchSpec {
        batch: 0,
        base_index: 0,
        n,
        axis_p: axis_set[0],
        axis_pp: axis_set[1],
        order: args.order.into(),
    };
    let mut fill = rng_stream(seed, stream_id(0, StreamKind::Fill, 0));
    let (pairs, records): (Vec<SingletPair>, Vec<CounterfactualRecord>) = match mode {
        McdMode::Lhv => {
            let generated = generate_lhv_batch(&spec, seed);
            let records = generated
                .iter()
                .map(|(h, p)| mcd_fill(McdSource::Lhv { hidden: h, pair: p }, &axis_set, &mut fill))
                .collect::<Result<Vec<_>, _>>()?;
            (generated.into_iter().map(|(_, p)| p).collect(), records)
        }
        McdMode::QmCollapse => {
            let pairs = generate_singlet_batch(&spec, seed);
            let records = pairs
                .iter()
                .map(|p| mcd_fill(McdSource::QmCollapse { pair: p }, &axis_set, &mut fill))
                .collect::<Result<Vec<_>, _>>()?;
            (pairs, records)
        }
    };
    let mut ledger = ProvenanceLedger::new();
    let columns = ledger.register_mcd_batch("table", &pairs, &records)?;
    let cell_term = |left: usize, right: usize| -> Result<CorrelationEstimate, CliError> {
        let xs: Vec<Outcome> = records.iter().map(|r| r.value(Side::P, left)).collect();
        let ys: Vec<Outcome> = records.iter().map(|r| r.value(Side::PPrime, right)).collect();
        Ok(correlate(
            &xs,
            &ys,
            Provenance::new(
                columns.p[left].clone(),
                columns.pp[right].clone(),
                IndexSet::range(0, n),
            ),
        )?)
    };
    // Four distinct columns reused consistently: p cells along the first
    // two axes against p' cells along the same two.
    let report = eval_v4(
        cell_term(0, 0)?,
        cell_term(0, 1)?,
        cell_term(1, 0)?,
        cell_term(1, 1)?,
        Some(&ledger),
    )?;
    let verdict = report.audit.as_ref().expect("a ledger was supplied");
    let conservation_enforced = records.first().is_some_and(|r| r.conservation_enforced);
    let summary = McdSummary {
        seed,
        model: args.model.to_string(),
        n,
        axis_set: args.axis_set.clone(),
        order: order_name(args.order).to_owned(),
        conservation_enforced,
        eval: eval_summary(&report),
        audit: AuditSummary::new(verdict),
    };
    let status = format!(
        "{} table over {} axes x {n} pairs; {} ({} offending rows); lhs {:.6}",
        args.model,
        axis_set.len(),
        verdict.classification,
        verdict.offending_indices.len(),
        report.lhs_value,
    );
    Ok(RunOutput {
        summary: Summary::McdTable(summary),
        event_files: vec![("events.csv".to_owned(), mcd_events(&pairs, &records))],
        ledger: Some(ledger),
        status,
    })
}

pub fn bound_oracle_run() -> RunOutput {
    let summary = BoundsSummary {
        v3: bellsim_core::bound_oracle(AbiKind::V3),
        v4: bellsim_core::bound_oracle(AbiKind::V4),
    };
    let status = format!("V3 bound {}, V4 bound {}", summary.v3, summary.v4);
    RunOutput {
        summary: Summary::BoundOracle(summary),
        event_files: Vec::new(),
        ledger: None,
        status,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn abi_kind_from_name(name: &str) -> Result<AbiKind, CliError> {
    match name {
        "V3" => Ok(AbiKind::V3),
        "V4" => Ok(AbiKind::V4),
        other => Err(config_err(format!("unknown inequality kind {other:?}"))),
    }
}

/// Rebuilds one stored term from ledger columns and re-correlates it.
fn replay_term(term: &TermSummary, ledger: &ProvenanceLedger) -> Result<CorrelationEstimate, CliError> {
    let left = ColumnId::new(term.left_column.clone());
    let right = ColumnId::new(term.right_column.clone());
    let mut columns = Vec::with_capacity(2);
    for id in [&left, &right] {
        let values = ledger.column_values(id)?;
        let indices = ledger.column_indices(id)?;
        let restricted: Vec<Outcome> = term
            .indices
            .iter()
            .map(|index| {
                indices
                    .position(index)
                    .map(|pos| values[pos])
                    .ok_or_else(|| config_err(format!("row {index} is not in column {id}")))
            })
            .collect::<Result<_, _>>()?;
        columns.push(restricted);
    }
    Ok(correlate(
        &columns[0],
        &columns[1],
        Provenance::new(left, right, term.indices.clone()),
    )?)
}

pub fn audit_replay(args: &ReplayArgs) -> Result<RunOutput, CliError> {
    let summary_file: SummaryFile = read_json(&args.in_dir.join("summary.json"))?;
    let ledger: ProvenanceLedger = read_json(&args.in_dir.join("ledger.json"))?;
    let (stored_terms, stored_lhs, stored_kind, stored_class) = match &summary_file.summary {
        Summary::SingletRun(s) => {
            (vec![s.term.clone()], None, None, s.audit.classification)
        }
        Summary::Chsh(s) | Summary::V3(s) => (
            s.eval.terms.clone(),
            Some(s.eval.lhs),
            Some(abi_kind_from_name(&s.eval.kind)?),
            s.audit.classification,
        ),
        Summary::McdTable(s) => (
            s.eval.terms.clone(),
            Some(s.eval.lhs),
            Some(abi_kind_from_name(&s.eval.kind)?),
            s.audit.classification,
        ),
        _ => return Err(config_err("this summary has no replayable ledger-backed terms")),
    };
    let rebuilt: Vec<CorrelationEstimate> = stored_terms
        .iter()
        .map(|t| replay_term(t, &ledger))
        .collect::<Result<_, _>>()?;
    let sums_match = rebuilt
        .iter()
        .zip(&stored_terms)
        .all(|(est, stored)| est.sum() == stored.sum && est.n() == stored.n);
    let recomputed_lhs = stored_kind.map(|kind| lhs_value(kind, &rebuilt));
    let lhs_match = match (recomputed_lhs, stored_lhs) {
        (Some(re), Some(stored)) => re.to_bits() == stored.to_bits(),
        _ => true,
    };
    let verdict = audit_abi(&rebuilt, &ledger)?;
    let classification_match = verdict.classification == stored_class;
    let summary = ReplaySummary {
        source: args.in_dir.display().to_string(),
        replayed_terms: rebuilt.len() as u64,
        sums_match,
        lhs_match,
        classification_match,
        classification: verdict.classification,
        recomputed_lhs,
        stored_lhs,
    };
    let status = format!(
        "replayed {} terms from {}: sums {}, lhs {}, classification {}",
        summary.replayed_terms,
        summary.source,
        if sums_match { "match" } else { "MISMATCH" },
        if lhs_match { "match" } else { "MISMATCH" },
        if classification_match { "match" } else { "MISMATCH" },
    );
    Ok(RunOutput {
        summary: Summary::AuditReplay(summary),
        event_files: Vec::new(),
        ledger: None,
        status,
    })
}
