use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tradeaudit_core::agent::{Mode, PromptOptions, RuleFollower};
use tradeaudit_core::execution::{run_episode, CostModel, EpisodeSetup, HoldingState};
use tradeaudit_core::market_data::{EvaluationWindow, MarketClock, MarketStore, WindowKind};
use tradeaudit_core::metrics::{buy_and_hold, compute_metrics, MetricConventions};
use tradeaudit_core::strategy::{evaluate_all, render_clause_library, StrategyId, StrategyParams};
use tradeaudit_core::synthetic::{random_news, random_walk_bars, sample_fundamentals, SyntheticSpec};

const TICKER: &str = "BEN";

fn store(n_days: usize) -> MarketStore {
    let clock = MarketClock::default();
    let spec = SyntheticSpec::new(TICKER, n_days, 42);
    MarketStore::new(
        random_walk_bars(&spec),
        random_news(&spec, &clock),
        sample_fundamentals(&spec),
        clock,
    )
    .unwrap()
}

fn long_window(store: &MarketStore) -> EvaluationWindow {
    let cal = store.calendar(TICKER);
    EvaluationWindow::new("long", WindowKind::LongStrategic, cal[cal.len() - 90..].to_vec()).unwrap()
}

fn bench_market_data(c: &mut Criterion) {
    let s = store(750);
    let last = *s.calendar(TICKER).last().unwrap();
    c.bench_function("gated_view", |b| {
        b.iter(|| s.gated_view(TICKER, black_box(last), HoldingState::new(1_000_000.0)).unwrap())
    });
    let state = s.gated_view(TICKER, last, HoldingState::new(1_000_000.0)).unwrap();
    let params = StrategyParams::default();
    c.bench_function("evaluate_all", |b| b.iter(|| evaluate_all(black_box(&state), &params)));
}

fn bench_episode(c: &mut Criterion) {
    let s = store(300);
    let window = long_window(&s);
    let params = StrategyParams::default();
    let clauses = render_clause_library(&params);
    let setup = EpisodeSetup {
        store: &s,
        ticker: TICKER,
        window: &window,
        mode: Mode::Strict,
        params: &params,
        clauses: &clauses,
        cost: CostModel::default(),
        initial_cash: 1_000_000.0,
        prompt: PromptOptions::default(),
    };
    c.bench_function("run_episode_90d", |b| {
        b.iter(|| {
            let mut agent = RuleFollower::new("oracle", StrategyId::ALL.to_vec());
            run_episode(&mut agent, black_box(&setup)).unwrap()
        })
    });

    let run = {
        let mut agent = RuleFollower::new("oracle", StrategyId::ALL.to_vec());
        run_episode(&mut agent, &setup).unwrap()
    };
    let equity = run.log.equity_curve();
    let closes: Vec<f64> = window
        .trading_days
        .iter()
        .map(|d| s.bar_on(TICKER, *d).unwrap().close)
        .collect();
    let bench = buy_and_hold(&closes, 1_000_000.0);
    let conv = MetricConventions::default();
    c.bench_function("compute_metrics_90d", |b| {
        b.iter(|| compute_metrics(black_box(&equity), &bench, &run.log.round_trips, &conv))
    });
}

criterion_group!(benches, bench_market_data, bench_episode);
criterion_main!(benches);
