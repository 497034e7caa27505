//! Black-box tests of the binary: exit codes, stdout/file output modes,
//! environment fallback, and ingest bookkeeping.

use std::path::Path;
use std::process::{Command, Output};

use bellsim_cli::output::{Summary, SummaryFile};

fn bellsim(args: &[&str], dir: &Path, env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bellsim"));
    cmd.args(args).current_dir(dir).env_remove("BELLSIM_SEED");
    if let Some(seed) = env_seed {
        cmd.env("BELLSIM_SEED", seed);
    }
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn parse_summary(text: &str) -> SummaryFile {
    serde_json::from_str(text).expect("stdout is a summary document")
}

#[test]
fn help_and_usage_errors_use_conventional_exit_codes() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let help = bellsim(&["--help"], tmp.path(), None);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("Usage"));

    let bad_flag = bellsim(&["singlet-run", "--bogus"], tmp.path(), None);
    assert_eq!(bad_flag.status.code(), Some(2));

    let bad_model = bellsim(&["singlet-run", "--model", "psychic"], tmp.path(), None);
    assert_eq!(bad_model.status.code(), Some(2));

    let zero_rows = bellsim(&["singlet-run", "--n", "0"], tmp.path(), None);
    assert_eq!(zero_rows.status.code(), Some(2));

    let wrong_angles =
        bellsim(&["chsh", "--n", "10", "--angles", "0,1"], tmp.path(), None);
    assert_eq!(wrong_angles.status.code(), Some(2));

    let table_model_on_pairs =
        bellsim(&["singlet-run", "--n", "10", "--model", "mcd_lhv"], tmp.path(), None);
    assert_eq!(table_model_on_pairs.status.code(), Some(2));
}

#[test]
fn missing_inputs_exit_with_io_code() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let replay = bellsim(&["audit-replay", "--in", "nope"], tmp.path(), None);
    assert_eq!(replay.status.code(), Some(3));

    let ingest = bellsim(&["ingest", "missing.csv"], tmp.path(), None);
    assert_eq!(ingest.status.code(), Some(3));
}

#[test]
fn stdout_mode_prints_the_summary_document() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let out = bellsim(&["singlet-run", "--n", "500", "--seed", "4"], tmp.path(), None);
    assert_eq!(out.status.code(), Some(0));
    let file = parse_summary(&stdout(&out));
    let Summary::SingletRun(run) = file.summary else {
        panic!("singlet-run summary expected");
    };
    assert_eq!(run.seed, 4);
    assert_eq!(run.n, 500);
    assert_eq!(run.model, "qm");
    assert_eq!(run.term.n, 500);
    assert!(run.convergence.is_none());
}

#[test]
fn out_dir_mode_writes_files_and_a_status_line() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let out = bellsim(
        &["singlet-run", "--n", "200", "--seed", "4", "--out-dir", "run", "--retain-history"],
        tmp.path(),
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("wrote "), "status names the summary path: {text}");
    for name in ["events.csv", "summary.json", "ledger.json"] {
        assert!(tmp.path().join("run").join(name).exists(), "{name} written");
    }
    let file: SummaryFile = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("run/summary.json")).expect("summary readable"),
    )
    .expect("summary parses");
    let Summary::SingletRun(run) = file.summary else {
        panic!("singlet-run summary expected");
    };
    let convergence = run.convergence.expect("history retained");
    assert!(convergence.stabilization_n <= 200);
    let events =
        std::fs::read_to_string(tmp.path().join("run/events.csv")).expect("events readable");
    assert_eq!(events.lines().count(), 1 + 2 * 200, "header plus two rows per pair");
}

#[test]
fn seed_falls_back_to_the_environment_and_flags_win() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let from_env = bellsim(&["singlet-run", "--n", "50"], tmp.path(), Some("99"));
    let Summary::SingletRun(run) = parse_summary(&stdout(&from_env)).summary else {
        panic!("singlet-run summary expected");
    };
    assert_eq!(run.seed, 99);

    let flag_wins = bellsim(&["singlet-run", "--n", "50", "--seed", "7"], tmp.path(), Some("99"));
    let Summary::SingletRun(run) = parse_summary(&stdout(&flag_wins)).summary else {
        panic!("singlet-run summary expected");
    };
    assert_eq!(run.seed, 7);
}

#[test]
fn replay_confirms_a_run_and_rejects_a_tampered_one() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let run = bellsim(
        &["v3", "--n", "400", "--seed", "6", "--out-dir", "run"],
        tmp.path(),
        None,
    );
    assert_eq!(run.status.code(), Some(0));

    let replay = bellsim(&["audit-replay", "--in", "run"], tmp.path(), None);
    assert_eq!(replay.status.code(), Some(0));
    let Summary::AuditReplay(verdict) = parse_summary(&stdout(&replay)).summary else {
        panic!("replay summary expected");
    };
    assert!(verdict.sums_match && verdict.lhs_match && verdict.classification_match);

    let summary_path = tmp.path().join("run/summary.json");
    let mut doc: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(&summary_path).expect("summary readable"),
    )
    .expect("summary parses");
    let sum = &mut doc["eval"]["terms"][0]["sum"];
    *sum = serde_json::json!(sum.as_i64().expect("stored sum is integral") + 2);
    std::fs::write(&summary_path, doc.to_string()).expect("summary writable");
    let replay = bellsim(&["audit-replay", "--in", "run"], tmp.path(), None);
    assert_eq!(replay.status.code(), Some(0), "a mismatch is a finding, not an error");
    let Summary::AuditReplay(verdict) = parse_summary(&stdout(&replay)).summary else {
        panic!("replay summary expected");
    };
    assert!(!verdict.sums_match);
}

#[test]
fn ingest_counts_bad_rows_and_counterfactual_cells() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let table = bellsim(
        &[
            "mcd-table",
            "--n",
            "100",
            "--seed",
            "3",
            "--axis-set",
            "0,0.785,1.9",
            "--out-dir",
            "run",
        ],
        tmp.path(),
        None,
    );
    assert_eq!(table.status.code(), Some(0));
    let ingest = bellsim(&["ingest", "run/events.csv"], tmp.path(), None);
    assert_eq!(ingest.status.code(), Some(0));
    let Summary::Ingest(summary) = parse_summary(&stdout(&ingest)).summary else {
        panic!("ingest summary expected");
    };
    // Three axes per side leave two counterfactual cells per side per pair.
    assert_eq!(summary.counterfactual_rows_skipped, 100 * 4);
    assert_eq!(summary.dropped_rows, 0);
    assert_eq!(summary.incomplete_pairs, 0);
    assert_eq!(summary.terms.len(), 1);
    assert_eq!(summary.terms[0].n, 100);

    let handmade = "pair_index,side,axis_angle,time_tick,outcome,counterfactual_flag\n\
                    0,p,0.0,1,1,0\n\
                    0,p',0.5,2,-1,0\n\
                    1,p,0.0,1,2,0\n\
                    1,p,0.0,1,1,0\n\
                    1,p,0.0,1,1,0\n\
                    1,p',0.5,2,not-a-number,0\n\
                    2,q,0.0,1,1,0\n\
                    3,p,0.0,1,1,0\n";
    std::fs::write(tmp.path().join("mixed.csv"), handmade).expect("fixture written");
    let ingest = bellsim(&["ingest", "mixed.csv"], tmp.path(), None);
    assert_eq!(ingest.status.code(), Some(0));
    let Summary::Ingest(summary) = parse_summary(&stdout(&ingest)).summary else {
        panic!("ingest summary expected");
    };
    // Bad outcome, duplicate side, unparsable outcome, unknown side: dropped.
    assert_eq!(summary.dropped_rows, 4);
    // Pair 1 keeps only its p row; pair 3 never had a p' row.
    assert_eq!(summary.incomplete_pairs, 2);
    assert_eq!(summary.terms[0].n, 1, "only pair 0 is complete");
}

#[test]
fn sign_table_ingest_audits_as_one_sample() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let rows = "x,y,z\n1,1,-1\n-1,1,1\n1,-1,-1\n-1,-1,1\n1,1,1\n";
    std::fs::write(tmp.path().join("signs.csv"), rows).expect("fixture written");
    let out = bellsim(&["ingest", "signs.csv", "--format", "signs"], tmp.path(), None);
    assert_eq!(out.status.code(), Some(0));
    let Summary::Ingest(summary) = parse_summary(&stdout(&out)).summary else {
        panic!("ingest summary expected");
    };
    assert_eq!(summary.kind, "V3");
    let eval = summary.eval.expect("three columns evaluate");
    assert!(eval.lhs <= eval.bound, "single tables respect the bound");
    let audit = summary.audit.expect("registered columns are audited");
    assert_eq!(audit.classification, bellsim_core::Classification::SingleSample);
}
