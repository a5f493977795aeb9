use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::output::{emit_reports, write_failure, write_run, ReportFormats};
use super::{ExperimentConfig, HarnessError, MarketConfig};
use crate::agent::{Mode, RateLimiter};
use crate::audit::{
    alignment_tax, compliance_check, disposition_effect, signals_from_log, win_rate_trap_flag, AlignmentTaxReport,
    ComplianceReport, DispositionReport, TrapFlag,
};
use crate::execution::{run_episode, EpisodeRun, EpisodeSetup, TranscriptEntry};
use crate::market_data::{
    load_bars, load_fundamentals, load_news, slice_windows, DataError, EvaluationWindow, MarketStore, WindowKind,
};
use crate::metrics::{buy_and_hold, compute_report, MetricsReport, UndefinedReason};
use crate::strategy::{render_clause_library, ClauseLibrary};

pub const REPORT_SET_SCHEMA_VERSION: u32 = 1;

/// Coordinates of one experiment cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub agent: String,
    pub mode: Mode,
    pub market: String,
    pub ticker: String,
    pub window: String,
    pub window_kind: WindowKind,
}

fn sanitize(part: &str) -> String {
    part.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '.') { c } else { '_' })
        .collect()
}

impl CellKey {
    /// Directory-safe identifier, unique within an experiment.
    pub fn run_id(&self) -> String {
        [
            self.agent.as_str(),
            self.mode.as_str(),
            self.market.as_str(),
            self.ticker.as_str(),
            self.window.as_str(),
        ]
        .iter()
        .map(|p| sanitize(p))
        .collect::<Vec<_>>()
        .join("__")
    }
}

/// Cell selection from `key=value` terms separated by commas. Repeating a
/// key widens the selection; different keys narrow it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellFilter {
    terms: BTreeMap<String, BTreeSet<String>>,
}

const FILTER_KEYS: [&str; 5] = ["agent", "mode", "market", "ticker", "window"];

impl CellFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn parse(spec: &str) -> Result<Self, HarnessError> {
        let mut terms: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for term in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (k, v) = term
                .split_once('=')
                .ok_or_else(|| HarnessError::InvalidFilter(format!("expected key=value, got {term:?}")))?;
            let k = k.trim();
            if !FILTER_KEYS.contains(&k) {
                return Err(HarnessError::InvalidFilter(format!(
                    "unknown key {k:?}; expected one of {}",
                    FILTER_KEYS.join(", ")
                )));
            }
            terms.entry(k.to_string()).or_default().insert(v.trim().to_string());
        }
        Ok(Self { terms })
    }

    pub fn matches(&self, key: &CellKey) -> bool {
        self.terms.iter().all(|(k, values)| match k.as_str() {
            "agent" => values.contains(&key.agent),
            "mode" => values.contains(key.mode.as_str()),
            "market" => values.contains(&key.market),
            "ticker" => values.contains(&key.ticker),
            "window" => values.contains(&key.window) || values.contains(key.window_kind.as_str()),
            _ => false,
        })
    }
}

#[derive(Debug, Clone)]
pub struct PlannedCell {
    pub key: CellKey,
    pub window: EvaluationWindow,
}

/// Loaded markets and the cells to run on them.
#[derive(Debug, Clone)]
pub struct Plan {
    pub stores: BTreeMap<String, Arc<MarketStore>>,
    pub cells: Vec<PlannedCell>,
}

fn open(path: &Path) -> Result<BufReader<File>, HarnessError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| HarnessError::io(path, e))
}

fn data_err(market: &str, what: &str, path: &Path) -> impl FnOnce(DataError) -> HarnessError {
    let context = format!("market {market}: {what} {}", path.display());
    move |source| HarnessError::Data { context, source }
}

pub(crate) fn load_market(market: &MarketConfig) -> Result<MarketStore, HarnessError> {
    let bars = load_bars(open(&market.bars)?).map_err(data_err(&market.name, "bars", &market.bars))?;
    let news = match &market.news {
        Some(p) => load_news(open(p)?).map_err(data_err(&market.name, "news", p))?,
        None => Vec::new(),
    };
    let docs = match &market.fundamentals {
        Some(p) => load_fundamentals(open(p)?).map_err(data_err(&market.name, "fundamentals", p))?,
        None => Vec::new(),
    };
    MarketStore::new(bars, news, docs, market.clock).map_err(|source| HarnessError::Data {
        context: format!("market {}", market.name),
        source,
    })
}

/// Loads every market and enumerates agent x mode x window x ticker cells
/// that pass `filter`.
pub fn plan_experiment(config: &ExperimentConfig, filter: &CellFilter) -> Result<Plan, HarnessError> {
    let mut stores = BTreeMap::new();
    let mut windows: Vec<(String, String, Vec<EvaluationWindow>)> = Vec::new();
    for (i, market) in config.markets.iter().enumerate() {
        let store = load_market(market)?;
        for ticker in &market.tickers {
            let calendar = store.calendar(ticker);
            if calendar.is_empty() {
                return Err(HarnessError::ConfigInvalid {
                    path: format!("markets[{i}].tickers"),
                    reason: format!("no bars for ticker {ticker:?} in {}", market.bars.display()),
                });
            }
            let ws = slice_windows(&calendar, &market.windows).map_err(|source| HarnessError::Data {
                context: format!("market {}: windows for {ticker}", market.name),
                source,
            })?;
            windows.push((market.name.clone(), ticker.clone(), ws));
        }
        stores.insert(market.name.clone(), Arc::new(store));
    }

    let mut cells = Vec::new();
    for agent in &config.agents {
        for &mode in &config.modes {
            for (market, ticker, ws) in &windows {
                for window in ws {
                    let key = CellKey {
                        agent: agent.id().to_string(),
                        mode,
                        market: market.clone(),
                        ticker: ticker.clone(),
                        window: window.label.clone(),
                        window_kind: window.kind,
                    };
                    if filter.matches(&key) {
                        cells.push(PlannedCell {
                            key,
                            window: window.clone(),
                        });
                    }
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(HarnessError::NoCells);
    }
    Ok(Plan { stores, cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapOutcome {
    pub flag: Option<TrapFlag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub undefined: Option<String>,
}

/// Every metric and audit figure for one completed cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub key: CellKey,
    pub metrics: MetricsReport,
    pub benchmark_total_return: Option<f64>,
    pub compliance: ComplianceReport,
    pub disposition: DispositionReport,
    pub trap: TrapOutcome,
    pub n_fallback_days: usize,
    pub transcript_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub run_id: String,
    pub key: CellKey,
    pub error: String,
}

/// One JSON object per line, in decision order.
pub fn transcript_jsonl(entries: &[TranscriptEntry]) -> Vec<u8> {
    let mut out = Vec::new();
    for e in entries {
        serde_json::to_writer(&mut out, e).expect("transcript entries serialize");
        out.push(b'\n');
    }
    out
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn analyze(key: &CellKey, run: &EpisodeRun, config: &ExperimentConfig, clauses: &ClauseLibrary) -> RunReport {
    let log = &run.log;
    let benchmark = buy_and_hold(&log.closes(), log.initial_cash);
    let metrics = compute_report(log, &benchmark, &config.metrics);
    let compliance = compliance_check(log, &signals_from_log(log), clauses)
        .expect("episode logs carry signals for every decision day");
    let trap = match win_rate_trap_flag(&metrics, &config.audit) {
        Ok(flag) => TrapOutcome {
            flag: Some(flag),
            undefined: None,
        },
        Err(e) => TrapOutcome {
            flag: None,
            undefined: Some(e.to_string()),
        },
    };
    RunReport {
        run_id: key.run_id(),
        key: key.clone(),
        benchmark_total_return: crate::metrics::total_return(&benchmark).ok(),
        metrics,
        compliance,
        disposition: disposition_effect(log),
        trap,
        n_fallback_days: run.transcript.iter().filter(|t| t.fallback).count(),
        transcript_sha256: sha256_hex(&transcript_jsonl(&run.transcript)),
    }
}

pub(crate) fn episode_setup<'a>(
    config: &'a ExperimentConfig,
    store: &'a MarketStore,
    key: &'a CellKey,
    window: &'a EvaluationWindow,
    clauses: &'a ClauseLibrary,
) -> EpisodeSetup<'a> {
    EpisodeSetup {
        store,
        ticker: &key.ticker,
        window,
        mode: key.mode,
        params: &config.strategy_params,
        clauses,
        cost: config.cost_model,
        initial_cash: config.initial_cash,
        prompt: config.prompt,
    }
}

pub type CellResult = Result<(RunReport, EpisodeRun), CellFailure>;

/// Runs the planned cells on a pool of `config.parallelism` threads.
/// Results come back in plan order; a failing cell never affects another.
pub fn execute_plan(config: &ExperimentConfig, plan: &Plan) -> Result<Vec<CellResult>, HarnessError> {
    let clauses = render_clause_library(&config.strategy_params);
    let limiter = Arc::new(RateLimiter::new(config.rate_limit.per_second, config.rate_limit.burst));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| HarnessError::ConfigInvalid {
            path: "parallelism".into(),
            reason: e.to_string(),
        })?;
    let specs: BTreeMap<&str, _> = config.agents.iter().map(|a| (a.id(), a)).collect();

    let results = pool.install(|| {
        plan.cells
            .par_iter()
            .map(|cell| {
                let fail = |error: String| CellFailure {
                    run_id: cell.key.run_id(),
                    key: cell.key.clone(),
                    error,
                };
                let store = &plan.stores[&cell.key.market];
                let mut agent = specs[cell.key.agent.as_str()]
                    .build(Some(limiter.clone()))
                    .map_err(|e| fail(e.to_string()))?;
                let setup = episode_setup(config, store, &cell.key, &cell.window, &clauses);
                let run = run_episode(agent.as_mut(), &setup).map_err(|e| fail(e.to_string()))?;
                Ok((analyze(&cell.key, &run, config, &clauses), run))
            })
            .collect()
    });
    Ok(results)
}

/// Per-group averages over runs. `excluded` counts runs whose value for a
/// metric was undefined and therefore left out of the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub agent: String,
    pub mode: Mode,
    pub market: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_kind: Option<WindowKind>,
    pub n_runs: usize,
    pub metrics: MetricsReport,
    pub excluded: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentEntry {
    pub agent: String,
    pub market: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_kind: Option<WindowKind>,
    pub tax: AlignmentTaxReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSet {
    pub schema_version: u32,
    pub runs: Vec<RunReport>,
    pub failures: Vec<CellFailure>,
    /// Per agent, mode and market, across tickers and windows.
    pub aggregates: Vec<AggregateRow>,
    /// Same, split by window kind.
    pub aggregates_by_window_kind: Vec<AggregateRow>,
    pub alignment_tax: Vec<AlignmentEntry>,
}

const AVERAGED: [(&str, &str); 9] = [
    ("TR", "total_return"),
    ("AR", "annualized_return"),
    ("alpha", "alpha"),
    ("SR", "sharpe"),
    ("Sortino", "sortino"),
    ("Vol", "volatility"),
    ("MDD", "max_drawdown"),
    ("Calmar", "calmar"),
    ("WR", "win_rate"),
];

fn average(reports: &[&MetricsReport]) -> (MetricsReport, BTreeMap<String, usize>) {
    let mut means: BTreeMap<&str, f64> = BTreeMap::new();
    let mut excluded = BTreeMap::new();
    let mut undefined = BTreeMap::new();
    for (short, long) in AVERAGED {
        let values: Vec<f64> = reports.iter().filter_map(|r| r.get(short)).collect();
        let missing = reports.len() - values.len();
        if missing > 0 {
            excluded.insert(long.to_string(), missing);
        }
        if values.is_empty() {
            let reason = reports
                .iter()
                .find_map(|r| r.undefined.get(long).copied())
                .unwrap_or(UndefinedReason::SeriesTooShort);
            undefined.insert(long.to_string(), reason);
        } else {
            means.insert(short, values.iter().sum::<f64>() / values.len() as f64);
        }
    }
    let m = |k: &str| means.get(k).copied();
    let report = MetricsReport {
        total_return: m("TR"),
        annualized_return: m("AR"),
        alpha: m("alpha"),
        sharpe: m("SR"),
        sortino: m("Sortino"),
        volatility: m("Vol"),
        max_drawdown: m("MDD"),
        calmar: m("Calmar"),
        win_rate: m("WR"),
        n_round_trips: reports.iter().map(|r| r.n_round_trips).sum(),
        n_trading_days: reports.iter().map(|r| r.n_trading_days).sum(),
        undefined,
    };
    (report, excluded)
}

type GroupKey = (String, String, Option<WindowKind>, Mode);

fn group_rows(runs: &[RunReport], by_kind: bool) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<GroupKey, Vec<&MetricsReport>> = BTreeMap::new();
    for r in runs {
        let kind = by_kind.then_some(r.key.window_kind);
        groups
            .entry((r.key.agent.clone(), r.key.market.clone(), kind, r.key.mode))
            .or_default()
            .push(&r.metrics);
    }
    groups
        .into_iter()
        .map(|((agent, market, window_kind, mode), reports)| {
            let (metrics, excluded) = average(&reports);
            AggregateRow {
                agent,
                mode,
                market,
                window_kind,
                n_runs: reports.len(),
                metrics,
                excluded,
            }
        })
        .collect()
}

fn alignment_entries(rows: &[AggregateRow]) -> Vec<AlignmentEntry> {
    let mut by_group: BTreeMap<(String, String, Option<WindowKind>), BTreeMap<Mode, MetricsReport>> = BTreeMap::new();
    for row in rows {
        by_group
            .entry((row.agent.clone(), row.market.clone(), row.window_kind))
            .or_default()
            .insert(row.mode, row.metrics.clone());
    }
    by_group
        .into_iter()
        .filter_map(|((agent, market, window_kind), reports)| {
            alignment_tax(&reports).ok().map(|tax| AlignmentEntry {
                agent,
                market,
                window_kind,
                tax,
            })
        })
        .collect()
}

/// Builds the report set from per-run reports. Runs and failures are
/// ordered by run id so the result does not depend on execution order.
pub fn aggregate(mut runs: Vec<RunReport>, mut failures: Vec<CellFailure>) -> ReportSet {
    runs.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    failures.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    let aggregates = group_rows(&runs, false);
    let aggregates_by_window_kind = group_rows(&runs, true);
    let mut alignment_tax = alignment_entries(&aggregates);
    alignment_tax.extend(alignment_entries(&aggregates_by_window_kind));
    ReportSet {
        schema_version: REPORT_SET_SCHEMA_VERSION,
        runs,
        failures,
        aggregates,
        aggregates_by_window_kind,
        alignment_tax,
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report_set: ReportSet,
    pub n_cells: usize,
    pub n_failed: usize,
    pub output_dir: PathBuf,
}

/// Plans, runs and persists a full experiment.
pub fn run_experiment(config: &ExperimentConfig, filter: &CellFilter) -> Result<ExperimentOutcome, HarnessError> {
    let plan = plan_experiment(config, filter)?;
    let results = execute_plan(config, &plan)?;

    let out = &config.output_dir;
    let runs_dir = out.join("runs");
    if runs_dir.exists() {
        std::fs::remove_dir_all(&runs_dir).map_err(|e| HarnessError::io(&runs_dir, e))?;
    }
    std::fs::create_dir_all(&runs_dir).map_err(|e| HarnessError::io(&runs_dir, e))?;
    let resolved = out.join("resolved_config.json");
    let json = serde_json::to_vec_pretty(config).expect("config serializes");
    std::fs::write(&resolved, json).map_err(|e| HarnessError::io(&resolved, e))?;

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok((report, run)) => {
                write_run(out, &report, &run)?;
                reports.push(report);
            }
            Err(failure) => {
                write_failure(out, &failure)?;
                failures.push(failure);
            }
        }
    }
    let report_set = aggregate(reports, failures);
    emit_reports(&report_set, out, &ReportFormats::default())?;
    Ok(ExperimentOutcome {
        n_cells: plan.cells.len(),
        n_failed: report_set.failures.len(),
        report_set,
        output_dir: out.clone(),
    })
}
