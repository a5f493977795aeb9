//! Audit harness for trading agents.
//!
//! Replays multi-source market data behind a point-in-time gate, asks an
//! agent for one action per day under one of three prompt modes, fills the
//! action at the next open, and scores the resulting episode for
//! performance, strategy compliance and behavioral bias.

pub mod agent;
pub mod audit;
pub mod execution;
pub mod harness;
pub mod market_data;
pub mod metrics;
pub mod strategy;
pub mod synthetic;

pub use agent::{Action, Agent, AgentError, AgentSpec, Decision, Mode, PromptBundle};
pub use audit::{AlignmentTaxReport, ComplianceReport, DispositionReport, TrapThresholds};
pub use execution::{CostModel, EpisodeLog, FillReport, HoldingState};
pub use harness::{ExperimentConfig, HarnessError, ReportSet};
pub use market_data::{Bar, DataError, EvaluationWindow, MarketState, MarketStore, WindowKind};
pub use metrics::{MetricConventions, MetricsReport};
pub use strategy::{ClauseLibrary, SignalSet, StrategyId, StrategyParams, StrategySignal};

#[cfg(test)]
pub(crate) mod test_support;
