mod common;

use std::path::Path;

use common::*;
use tradeaudit_core::agent::{Action, Mode};
use tradeaudit_core::execution::TranscriptEntry;
use tradeaudit_core::harness::{
    load_config, plan_experiment, replay, run_experiment, CellFilter, HarnessError, ReplayFlag, ReportSet,
    AGGREGATE_HEADER,
};

fn read_report_set(out: &Path) -> ReportSet {
    serde_json::from_slice(&std::fs::read(out.join("report_set.json")).unwrap()).unwrap()
}

#[test]
fn one_agent_three_modes_one_cell_each() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_experiment(dir.path(), &["AAA"], 130, OFFLINE_AGENTS);
    let config = load_config(&cfg).unwrap();
    let filter = CellFilter::parse("agent=script,window=short-1").unwrap();
    let outcome = run_experiment(&config, &filter).unwrap();
    assert_eq!(outcome.n_cells, 3);
    assert_eq!(outcome.n_failed, 0);
    let rs = &outcome.report_set;
    assert_eq!(rs.runs.len(), 3);
    assert_eq!(rs.aggregates.len(), 3);
    let modes: Vec<Mode> = rs.aggregates.iter().map(|r| r.mode).collect();
    assert_eq!(modes, Mode::ALL.to_vec());
    for run in &rs.runs {
        let run_dir = outcome.output_dir.join("runs").join(&run.run_id);
        for f in ["episode.json", "transcript.jsonl", "report.json", "violations.txt", "equity.svg"] {
            assert!(run_dir.join(f).is_file(), "{f} missing for {}", run.run_id);
        }
    }
    assert_eq!(&read_report_set(&outcome.output_dir), rs);
}

#[test]
fn full_grid_is_deterministic_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_experiment(dir.path(), &["AAA", "BBB"], 130, OFFLINE_AGENTS);
    let config = load_config(&cfg).unwrap();
    let out = config.output_dir.clone();

    let first = run_experiment(&config, &CellFilter::all()).unwrap();
    assert_eq!(first.n_cells, 2 * 3 * 2 * 4);
    assert_eq!(first.n_failed, 0);
    let bytes = std::fs::read(out.join("report_set.json")).unwrap();
    let csv = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();

    run_experiment(&config, &CellFilter::all()).unwrap();
    assert_eq!(std::fs::read(out.join("report_set.json")).unwrap(), bytes);
    assert_eq!(std::fs::read_to_string(out.join("aggregate.csv")).unwrap(), csv);

    let header = csv.lines().next().unwrap();
    assert_eq!(header, AGGREGATE_HEADER.join(","));
    assert_eq!(csv.lines().count(), 1 + 2 * 3);

    let replayed = replay(&out).unwrap();
    assert!(replayed.flags.is_empty(), "{:?}", replayed.flags);
    assert!(replayed.identical);
    assert_eq!(replayed.report_set, first.report_set);

    // Rule follower is compliant on every strict run.
    for run in first.report_set.runs.iter().filter(|r| r.key.agent == "oracle") {
        assert!(run.compliance.violations.is_empty(), "{}", run.run_id);
    }

    // Aggregates equal the mean of their constituents.
    for row in &first.report_set.aggregates {
        let tr: Vec<f64> = first
            .report_set
            .runs
            .iter()
            .filter(|r| r.key.agent == row.agent && r.key.mode == row.mode && r.key.market == row.market)
            .filter_map(|r| r.metrics.total_return)
            .collect();
        let mean = tr.iter().sum::<f64>() / tr.len() as f64;
        assert!((row.metrics.total_return.unwrap() - mean).abs() < 1e-12);
        assert_eq!(row.n_runs, 8);
    }
}

#[test]
fn tampered_transcript_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_experiment(dir.path(), &["AAA"], 130, OFFLINE_AGENTS);
    let config = load_config(&cfg).unwrap();
    let outcome = run_experiment(&config, &CellFilter::parse("agent=script,mode=free").unwrap()).unwrap();
    let victim = &outcome.report_set.runs[0].run_id;
    let path = outcome.output_dir.join("runs").join(victim).join("transcript.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut entry: TranscriptEntry = serde_json::from_str(&lines[0]).unwrap();
    assert_eq!(entry.decision.action, Action::Buy);
    entry.decision.action = Action::Hold;
    entry.decision.quantity = None;
    lines[0] = serde_json::to_string(&entry).unwrap();
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();

    let replayed = replay(&outcome.output_dir).unwrap();
    assert!(!replayed.identical);
    assert!(replayed
        .flags
        .iter()
        .any(|f| matches!(f, ReplayFlag::ChecksumMismatch { run_id, .. } if run_id == victim)));
    assert!(replayed
        .flags
        .iter()
        .any(|f| matches!(f, ReplayFlag::ReportChanged { run_id } if run_id == victim)));

    std::fs::write(&path, "{ not json\n").unwrap();
    assert!(matches!(replay(&outcome.output_dir), Err(HarnessError::TranscriptCorrupt { .. })));
}

#[test]
fn empty_directory_has_no_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(replay(dir.path()), Err(HarnessError::TranscriptMissing(_))));
}

#[test]
fn unreachable_endpoint_fails_only_its_cells() {
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let agents = format!(
        r#"{OFFLINE_AGENTS}
[[agents]]
kind = "remote"
id = "down"
endpoint = "http://127.0.0.1:{port}/v1/chat/completions"
model = "m"
max_retries = 0
retry_backoff_ms = 0
timeout_secs = 2
"#
    );
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_experiment(dir.path(), &["AAA"], 130, &agents);
    let config = load_config(&cfg).unwrap();
    let outcome = run_experiment(&config, &CellFilter::parse("window=short-2").unwrap()).unwrap();
    assert_eq!(outcome.n_cells, 9);
    assert_eq!(outcome.n_failed, 3);
    assert!(outcome.report_set.failures.iter().all(|f| f.key.agent == "down"));
    assert!(outcome.report_set.failures[0].error.contains("unavailable"));
    assert_eq!(outcome.report_set.runs.len(), 6);
    let fail_dir = outcome.output_dir.join("runs").join(&outcome.report_set.failures[0].run_id);
    assert!(fail_dir.join("failure.json").is_file());

    // Offline cells are unaffected by the failing agent.
    let solo = tempfile::tempdir().unwrap();
    let cfg = write_experiment(solo.path(), &["AAA"], 130, OFFLINE_AGENTS);
    let alone = run_experiment(&load_config(&cfg).unwrap(), &CellFilter::parse("window=short-2").unwrap()).unwrap();
    assert_eq!(alone.report_set.runs, outcome.report_set.runs);

    let replayed = replay(&outcome.output_dir).unwrap();
    assert!(replayed.identical);
}

#[test]
fn sentinels_render_as_empty_cells() {
    let agents = r#"
[[agents]]
kind = "scripted"
id = "idle"
decisions = []
"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_experiment(dir.path(), &["AAA"], 130, agents);
    let config = load_config(&cfg).unwrap();
    let outcome = run_experiment(&config, &CellFilter::parse("mode=free").unwrap()).unwrap();
    let csv = std::fs::read_to_string(outcome.output_dir.join("aggregate.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..3], &["idle", "free", "SYN"]);
    // TR is zero; SR and WR are undefined.
    assert_eq!(row[3], "0.0000");
    assert_eq!(row[4], "");
    assert_eq!(row[7], "");
    let rs = read_report_set(&outcome.output_dir);
    assert_eq!(rs.aggregates[0].excluded.get("win_rate"), Some(&4));
}

#[test]
fn data_and_filter_errors_surface_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_experiment(dir.path(), &["AAA"], 40, OFFLINE_AGENTS);
    let config = load_config(&cfg).unwrap();
    assert!(matches!(
        plan_experiment(&config, &CellFilter::all()),
        Err(HarnessError::Data { .. })
    ));
    let cfg = write_experiment(dir.path(), &["AAA"], 130, OFFLINE_AGENTS);
    let config = load_config(&cfg).unwrap();
    assert!(matches!(
        plan_experiment(&config, &CellFilter::parse("agent=nobody").unwrap()),
        Err(HarnessError::NoCells)
    ));
    let mut bad = config.clone();
    bad.markets[0].tickers.push("ZZZ".into());
    assert!(matches!(
        plan_experiment(&bad, &CellFilter::all()),
        Err(HarnessError::ConfigInvalid { .. })
    ));
}
