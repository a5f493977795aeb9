use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::output::pretty;
use super::run::{aggregate, analyze, episode_setup, load_market, sha256_hex, CellFailure, ReportSet, RunReport};
use super::{ExperimentConfig, HarnessError};
use crate::agent::{AgentTurn, TranscriptAgent};
use crate::execution::{run_episode, EpisodeLog, TranscriptEntry};
use crate::market_data::MarketStore;
use crate::strategy::render_clause_library;

/// Something replay noticed that differs from the recorded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReplayFlag {
    ChecksumMismatch {
        run_id: String,
        recorded: String,
        actual: String,
    },
    StateDigestMismatch {
        run_id: String,
        decision_day: chrono::NaiveDate,
    },
    ReportChanged {
        run_id: String,
    },
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub report_set: ReportSet,
    pub flags: Vec<ReplayFlag>,
    /// True when the rebuilt report set serializes to exactly the bytes of
    /// the persisted `report_set.json`.
    pub identical: bool,
}

fn read(path: &Path) -> Result<Vec<u8>, HarnessError> {
    std::fs::read(path).map_err(|e| HarnessError::io(path, e))
}

fn corrupt(path: &Path, reason: impl ToString) -> HarnessError {
    HarnessError::TranscriptCorrupt {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    serde_json::from_slice(&read(path)?).map_err(|e| corrupt(path, e))
}

fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let runs = dir.join("runs");
    let mut dirs: Vec<PathBuf> = match std::fs::read_dir(&runs) {
        Ok(entries) => entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.join("transcript.jsonl").is_file() || p.join("failure.json").is_file())
            .collect(),
        Err(_) => Vec::new(),
    };
    if dirs.is_empty() {
        return Err(HarnessError::TranscriptMissing(dir.to_path_buf()));
    }
    dirs.sort();
    Ok(dirs)
}

/// Re-executes engine, metrics and audit from the transcripts persisted
/// under `dir`, without contacting any endpoint.
pub fn replay(dir: &Path) -> Result<ReplayOutcome, HarnessError> {
    let dirs = run_dirs(dir)?;
    let config: ExperimentConfig = {
        let path = dir.join("resolved_config.json");
        serde_json::from_slice(&read(&path)?).map_err(|e| HarnessError::ConfigParse(format!("{}: {e}", path.display())))?
    };
    let clauses = render_clause_library(&config.strategy_params);
    let mut stores: BTreeMap<String, MarketStore> = BTreeMap::new();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut flags = Vec::new();

    for run_dir in dirs {
        let failure_path = run_dir.join("failure.json");
        if failure_path.is_file() {
            failures.push(parse_json::<CellFailure>(&failure_path)?);
            continue;
        }
        let transcript_path = run_dir.join("transcript.jsonl");
        let recorded: RunReport = parse_json(&run_dir.join("report.json"))?;
        let log: EpisodeLog = parse_json(&run_dir.join("episode.json"))?;
        let bytes = read(&transcript_path)?;

        let actual = sha256_hex(&bytes);
        if actual != recorded.transcript_sha256 {
            flags.push(ReplayFlag::ChecksumMismatch {
                run_id: recorded.run_id.clone(),
                recorded: recorded.transcript_sha256.clone(),
                actual,
            });
        }
        let text = std::str::from_utf8(&bytes).map_err(|e| corrupt(&transcript_path, e))?;
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<TranscriptEntry>(l).map_err(|e| corrupt(&transcript_path, format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let key = &recorded.key;
        if !stores.contains_key(&key.market) {
            let market = config
                .markets
                .iter()
                .find(|m| m.name == key.market)
                .ok_or_else(|| corrupt(&run_dir, format!("market {:?} is not in the resolved config", key.market)))?;
            stores.insert(key.market.clone(), load_market(market)?);
        }
        let turns = entries
            .iter()
            .map(|e| AgentTurn {
                decision: e.decision.clone(),
                responses: e.responses.clone(),
                fallback: e.fallback,
            })
            .collect();
        let mut agent = TranscriptAgent::new(key.agent.clone(), turns);
        let setup = episode_setup(&config, &stores[&key.market], key, &log.window, &clauses);
        let run = run_episode(&mut agent, &setup).map_err(|e| corrupt(&transcript_path, e))?;
        if run.transcript.len() != entries.len() {
            return Err(corrupt(
                &transcript_path,
                format!("{} entries recorded, {} decision days replayed", entries.len(), run.transcript.len()),
            ));
        }
        for (old, new) in entries.iter().zip(&run.transcript) {
            if old.state_digest != new.state_digest {
                flags.push(ReplayFlag::StateDigestMismatch {
                    run_id: recorded.run_id.clone(),
                    decision_day: old.decision_day,
                });
            }
        }
        let report = analyze(key, &run, &config, &clauses);
        if report != recorded {
            flags.push(ReplayFlag::ReportChanged {
                run_id: recorded.run_id.clone(),
            });
        }
        runs.push(report);
    }

    let report_set = aggregate(runs, failures);
    let identical = match std::fs::read(dir.join("report_set.json")) {
        Ok(original) => original == pretty(&report_set),
        Err(_) => false,
    };
    Ok(ReplayOutcome {
        report_set,
        flags,
        identical,
    })
}
