use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{execute_fill, mark_to_market, CostModel, FillReport, HoldingState};
use crate::agent::{build_prompt, Agent, AgentError, Decision, Mode, PromptOptions};
use crate::market_data::{DataError, EvaluationWindow, MarketStore};
use crate::strategy::{evaluate_all, ClauseLibrary, SignalSet, StrategyParams};

pub const EPISODE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpisodeError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("no bar for {ticker} on {day}")]
    MissingBar { ticker: String, day: NaiveDate },
    #[error("initial cash must be positive, got {0}")]
    InvalidCash(f64),
}

/// One decision day: the state the agent saw at the close of `decision_day`,
/// what it decided, and the fill and mark on the next day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionStep {
    pub decision_day: NaiveDate,
    pub state_digest: String,
    /// Close of the decision day.
    pub decision_close: f64,
    pub holding_before: HoldingState,
    pub signals: SignalSet,
    pub decision: Decision,
    pub fill: FillReport,
    /// Holding after the fill, marked at the fill day's close.
    pub holding_after: HoldingState,
    pub equity_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyMark {
    pub day: NaiveDate,
    pub close: f64,
    pub equity: f64,
}

/// A position from its first share to flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrip {
    pub entry_day: NaiveDate,
    pub exit_day: NaiveDate,
    pub realized_pnl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub schema_version: u32,
    pub agent_id: String,
    pub mode: Mode,
    pub ticker: String,
    pub window: EvaluationWindow,
    pub initial_cash: f64,
    pub steps: Vec<DecisionStep>,
    /// Close-of-day equity for every window day, first day included.
    pub marks: Vec<DailyMark>,
    pub round_trips: Vec<RoundTrip>,
    pub final_holding: HoldingState,
}

impl EpisodeLog {
    pub fn equity_curve(&self) -> Vec<f64> {
        self.marks.iter().map(|m| m.equity).collect()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.marks.iter().map(|m| m.close).collect()
    }

    pub fn final_equity(&self) -> f64 {
        self.marks.last().map_or(self.initial_cash, |m| m.equity)
    }
}

/// Prompt, raw output and decision for one day, persisted as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub decision_day: NaiveDate,
    pub agent_id: String,
    pub mode: Mode,
    pub state_digest: String,
    pub system_text: String,
    pub user_text: String,
    pub responses: Vec<String>,
    pub fallback: bool,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRun {
    pub log: EpisodeLog,
    pub transcript: Vec<TranscriptEntry>,
}

/// Everything an episode needs besides the agent.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeSetup<'a> {
    pub store: &'a MarketStore,
    pub ticker: &'a str,
    pub window: &'a EvaluationWindow,
    pub mode: Mode,
    pub params: &'a StrategyParams,
    pub clauses: &'a ClauseLibrary,
    pub cost: CostModel,
    pub initial_cash: f64,
    pub prompt: PromptOptions,
}

/// Runs the T+1 loop over a window: decide at the close of T, fill at the
/// open of T+1, mark at the close of T+1. The last window day only gets a
/// mark; open positions are carried, not liquidated.
pub fn run_episode(agent: &mut dyn Agent, setup: &EpisodeSetup<'_>) -> Result<EpisodeRun, EpisodeError> {
    if !(setup.initial_cash.is_finite() && setup.initial_cash > 0.0) {
        return Err(EpisodeError::InvalidCash(setup.initial_cash));
    }
    let bar = |day: NaiveDate| {
        setup
            .store
            .bar_on(setup.ticker, day)
            .ok_or_else(|| EpisodeError::MissingBar {
                ticker: setup.ticker.to_string(),
                day,
            })
    };
    let days = &setup.window.trading_days;
    let first = bar(days[0])?;
    let mut holding = mark_to_market(&HoldingState::new(setup.initial_cash), first.close);
    let mut marks = vec![DailyMark {
        day: days[0],
        close: first.close,
        equity: holding.equity(),
    }];
    let mut steps = Vec::with_capacity(days.len().saturating_sub(1));
    let mut transcript = Vec::with_capacity(days.len().saturating_sub(1));
    let mut round_trips = Vec::new();
    let mut open_trip: Option<(NaiveDate, f64)> = None;

    for pair in days.windows(2) {
        let (today, next) = (pair[0], pair[1]);
        let state = setup.store.gated_view(setup.ticker, today, holding.clone())?;
        let signals = evaluate_all(&state, setup.params);
        let prompt = build_prompt(setup.mode, &state, setup.clauses, &setup.prompt);
        let turn = agent.decide(&prompt, &signals)?;
        let digest = state.digest();
        let decision_close = state.latest_bar().close;

        let next_bar = bar(next)?;
        let (filled, fill) = execute_fill(&holding, &turn.decision, next_bar.open, next, &setup.cost);
        if holding.shares == 0 && filled.shares > 0 {
            open_trip = Some((next, holding.realized_pnl));
        }
        if holding.shares > 0 && filled.shares == 0 {
            if let Some((entry_day, realized_at_entry)) = open_trip.take() {
                round_trips.push(RoundTrip {
                    entry_day,
                    exit_day: next,
                    realized_pnl: filled.realized_pnl - realized_at_entry,
                });
            }
        }
        let marked = mark_to_market(&filled, next_bar.close);
        let equity = marked.equity();

        transcript.push(TranscriptEntry {
            decision_day: today,
            agent_id: agent.id().to_string(),
            mode: setup.mode,
            state_digest: digest.clone(),
            system_text: prompt.system_text,
            user_text: prompt.user_text,
            responses: turn.responses,
            fallback: turn.fallback,
            decision: turn.decision.clone(),
        });
        steps.push(DecisionStep {
            decision_day: today,
            state_digest: digest,
            decision_close,
            holding_before: holding,
            signals,
            decision: turn.decision,
            fill,
            holding_after: marked.clone(),
            equity_after: equity,
        });
        marks.push(DailyMark {
            day: next,
            close: next_bar.close,
            equity,
        });
        holding = marked;
    }

    Ok(EpisodeRun {
        log: EpisodeLog {
            schema_version: EPISODE_SCHEMA_VERSION,
            agent_id: agent.id().to_string(),
            mode: setup.mode,
            ticker: setup.ticker.to_string(),
            window: setup.window.clone(),
            initial_cash: setup.initial_cash,
            steps,
            marks,
            round_trips,
            final_holding: holding,
        },
        transcript,
    })
}
