#![allow(dead_code)]

use chrono::NaiveDate;
use tradeaudit_core::agent::{Agent, Mode, PromptOptions};
use tradeaudit_core::execution::{run_episode, CostModel, EpisodeRun, EpisodeSetup};
use tradeaudit_core::market_data::{Bar, EvaluationWindow, MarketClock, MarketStore, WindowKind};
use tradeaudit_core::strategy::{render_clause_library, StrategyParams};
use tradeaudit_core::synthetic::{random_news, random_walk_bars, sample_fundamentals, SyntheticSpec};

pub fn day(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn bar(ticker: &str, trading_day: NaiveDate, open: f64, close: f64) -> Bar {
    Bar {
        ticker: ticker.into(),
        trading_day,
        open,
        high: open.max(close),
        low: open.min(close),
        close,
        volume: 1_000_000,
    }
}

pub fn store(bars: Vec<Bar>) -> MarketStore {
    MarketStore::new(bars, Vec::new(), Vec::new(), MarketClock::default()).unwrap()
}

pub fn synthetic_store(tickers: &[&str], n_days: usize, seed: u64) -> MarketStore {
    let clock = MarketClock::default();
    let mut bars = Vec::new();
    let mut news = Vec::new();
    let mut docs = Vec::new();
    for (i, t) in tickers.iter().enumerate() {
        let spec = SyntheticSpec::new(*t, n_days, seed + i as u64);
        bars.extend(random_walk_bars(&spec));
        news.extend(random_news(&spec, &clock));
        docs.extend(sample_fundamentals(&spec));
    }
    MarketStore::new(bars, news, docs, clock).unwrap()
}

/// Window over the last `len` days of the ticker's calendar, built without
/// the length bounds so short fixtures can be used.
pub fn tail_window(store: &MarketStore, ticker: &str, len: usize) -> EvaluationWindow {
    let cal = store.calendar(ticker);
    EvaluationWindow {
        label: "fixture".into(),
        kind: WindowKind::ShortTactical,
        trading_days: cal[cal.len() - len..].to_vec(),
    }
}

pub fn run_with(
    agent: &mut dyn Agent,
    store: &MarketStore,
    ticker: &str,
    window: &EvaluationWindow,
    mode: Mode,
) -> EpisodeRun {
    let params = StrategyParams::default();
    let clauses = render_clause_library(&params);
    let setup = EpisodeSetup {
        store,
        ticker,
        window,
        mode,
        params: &params,
        clauses: &clauses,
        cost: CostModel::default(),
        initial_cash: 1_000_000.0,
        prompt: PromptOptions::default(),
    };
    run_episode(agent, &setup).unwrap()
}

pub const OFFLINE_AGENTS: &str = r#"
[[agents]]
kind = "rule_follower"
id = "oracle"

[[agents]]
kind = "scripted"
id = "script"
decisions = [
  { action = 1, quantity = 500, rationale = "enter", cited_clauses = ["S2.entry"] },
  { action = 0, rationale = "wait" },
  { action = -1, rationale = "exit", cited_clauses = ["S2.exit"] },
  { action = 1, rationale = "again" },
]
"#;

/// Writes synthetic bars, news and fundamentals for `tickers` plus an
/// experiment config into `dir`. Returns the config path.
pub fn write_experiment(dir: &std::path::Path, tickers: &[&str], n_days: usize, extra_toml: &str) -> std::path::PathBuf {
    use tradeaudit_core::synthetic::{write_bars_csv, write_news_jsonl};
    let clock = MarketClock::default();
    let data = dir.join("data");
    std::fs::create_dir_all(&data).unwrap();
    let mut bars = Vec::new();
    let mut news = Vec::new();
    let mut docs = Vec::new();
    for (i, t) in tickers.iter().enumerate() {
        let spec = SyntheticSpec::new(*t, n_days, 100 + i as u64);
        bars.extend(random_walk_bars(&spec));
        news.extend(random_news(&spec, &clock));
        docs.extend(sample_fundamentals(&spec));
    }
    write_bars_csv(&bars, std::fs::File::create(data.join("bars.csv")).unwrap()).unwrap();
    write_news_jsonl(&news, std::fs::File::create(data.join("news.jsonl")).unwrap()).unwrap();
    std::fs::write(data.join("fundamentals.json"), serde_json::to_vec(&docs).unwrap()).unwrap();

    let ticker_list = tickers.iter().map(|t| format!("\"{t}\"")).collect::<Vec<_>>().join(", ");
    let config = format!(
        r#"output_dir = "out"
parallelism = 4
seed = 7
{extra_toml}

[[markets]]
name = "SYN"
bars = "data/bars.csv"
news = "data/news.jsonl"
fundamentals = "data/fundamentals.json"
tickers = [{ticker_list}]

[markets.windows]
short_count = 3
short_length = 15
long_count = 1
long_length = 90
"#
    );
    let path = dir.join("experiment.toml");
    std::fs::write(&path, config).unwrap();
    path
}
