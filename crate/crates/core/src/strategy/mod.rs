//! The four reference strategies and their clause library.
//!
//! | id | name                        | entry                                      | exit                 |
//! |----|-----------------------------|--------------------------------------------|----------------------|
//! | S1 | short-term reversal         | lookback return at or below -threshold     | holding period       |
//! | S2 | breakout momentum           | close above the prior N-day high           | close below N-day low|
//! | S3 | volatility compression      | current vol within low percentile + uptick | holding period       |
//! | S4 | price-volume confirmation   | up close on volume above multiple of mean  | holding period       |
//!
//! Signals are pure functions of a [`MarketState`](crate::market_data::MarketState).
//! When a position is open and an exit condition holds, the exit wins over a
//! simultaneous entry.

mod clauses;
mod params;
mod signals;

pub use clauses::{render_clause_library, Clause, ClauseLibrary, ClauseRef, Leg};
pub use params::StrategyParams;
pub use signals::{
    evaluate_all, signal_s1, signal_s2, signal_s3, signal_s4, Direction, SignalSet, StrategySignal,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StrategyId {
    S1,
    S2,
    S3,
    S4,
}

impl StrategyId {
    pub const ALL: [StrategyId; 4] = [StrategyId::S1, StrategyId::S2, StrategyId::S3, StrategyId::S4];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyId::S1 => "S1",
            StrategyId::S2 => "S2",
            StrategyId::S3 => "S3",
            StrategyId::S4 => "S4",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            StrategyId::S1 => "Short-Term Reversal",
            StrategyId::S2 => "Breakout Momentum",
            StrategyId::S3 => "Volatility Compression",
            StrategyId::S4 => "Price-Volume Confirmation",
        }
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyId {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "S1" => Ok(StrategyId::S1),
            "S2" => Ok(StrategyId::S2),
            "S3" => Ok(StrategyId::S3),
            "S4" => Ok(StrategyId::S4),
            other => Err(StrategyError::UnknownStrategy(other.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("{strategy}: insufficient history ({available} bars, {required} required)")]
    InsufficientHistory {
        strategy: StrategyId,
        required: usize,
        available: usize,
    },
    #[error("invalid strategy parameter {field}: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error("unknown clause {0:?}")]
    UnknownClause(String),
}
