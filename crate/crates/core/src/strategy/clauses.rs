use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Direction, StrategyError, StrategyId, StrategyParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Leg {
    Entry,
    Exit,
}

impl Leg {
    pub fn direction(self) -> Direction {
        match self {
            Leg::Entry => Direction::Buy,
            Leg::Exit => Direction::Sell,
        }
    }
}

/// Clause identifier such as `S2.entry`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClauseRef {
    pub strategy: StrategyId,
    pub leg: Leg,
}

impl ClauseRef {
    pub fn new(strategy: StrategyId, leg: Leg) -> Self {
        Self { strategy, leg }
    }
}

impl fmt::Display for ClauseRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let leg = match self.leg {
            Leg::Entry => "entry",
            Leg::Exit => "exit",
        };
        write!(f, "{}.{}", self.strategy, leg)
    }
}

impl FromStr for ClauseRef {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || StrategyError::UnknownClause(s.to_string());
        let (strategy, leg) = s.split_once('.').ok_or_else(unknown)?;
        let strategy = strategy.parse().map_err(|_| unknown())?;
        let leg = match leg {
            "entry" => Leg::Entry,
            "exit" => Leg::Exit,
            _ => return Err(unknown()),
        };
        Ok(Self { strategy, leg })
    }
}

impl Serialize for ClauseRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClauseRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One rule of the library. `predicate` names the signal outcome that makes
/// the clause true on a given day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub id: ClauseRef,
    pub strategy_id: StrategyId,
    pub text: String,
    pub predicate: ClausePredicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClausePredicate {
    pub strategy: StrategyId,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseLibrary {
    pub clauses: Vec<Clause>,
}

impl ClauseLibrary {
    pub fn get(&self, id: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.id.to_string() == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = String> + '_ {
        self.clauses.iter().map(|c| c.id.to_string())
    }

    /// Plain-text rendering, one `[id] text` line per clause.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for c in &self.clauses {
            out.push_str(&format!("[{}] {}\n", c.id, c.text));
        }
        out
    }
}

fn pct(x: f64) -> String {
    let s = format!("{:.4}", x * 100.0);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Renders the eight entry/exit clauses with the concrete parameter values.
pub fn render_clause_library(params: &StrategyParams) -> ClauseLibrary {
    let hold = params.exit_holding_period;
    let time_exit = |id: StrategyId| {
        format!(
            "{} ({}) exit: SELL the open position once it has been held for at least {hold} trading days after the fill.",
            id,
            id.title()
        )
    };
    let n2 = params.s2_breakout_lookback;
    let texts = [
        (
            StrategyId::S1,
            Leg::Entry,
            format!(
                "S1 (Short-Term Reversal) entry: BUY when the close-to-close return over the last {} trading days is at or below -{}% (a short-term plunge; expect mean reversion).",
                params.s1_lookback,
                pct(params.s1_plunge_threshold)
            ),
        ),
        (StrategyId::S1, Leg::Exit, time_exit(StrategyId::S1)),
        (
            StrategyId::S2,
            Leg::Entry,
            format!(
                "S2 (Breakout Momentum) entry: BUY when today's close breaks the {n2}-day high, i.e. is strictly above the highest high of the {n2} trading days before today. A close equal to the {n2}-day high is not a breakout."
            ),
        ),
        (
            StrategyId::S2,
            Leg::Exit,
            format!(
                "S2 (Breakout Momentum) exit: SELL the open position when today's close is strictly below the {n2}-day low (the lowest low of the {n2} trading days before today)."
            ),
        ),
        (
            StrategyId::S3,
            Leg::Entry,
            format!(
                "S3 (Volatility Compression) entry: BUY when the {w}-day realized volatility of daily log returns is at or below the {p}th percentile of the rolling {w}-day volatilities over the last {t} trading days, and today's close is strictly above yesterday's close (accumulation in a low-volatility zone).",
                w = params.s3_vol_window,
                p = pct(params.s3_percentile),
                t = params.s3_trailing_window
            ),
        ),
        (StrategyId::S3, Leg::Exit, time_exit(StrategyId::S3)),
        (
            StrategyId::S4,
            Leg::Entry,
            format!(
                "S4 (Price-Volume Confirmation) entry: BUY when today's close is strictly above yesterday's close and today's volume is strictly greater than {}x the average volume of the previous {} trading days.",
                params.s4_volume_multiplier, params.s4_volume_window
            ),
        ),
        (StrategyId::S4, Leg::Exit, time_exit(StrategyId::S4)),
    ];
    ClauseLibrary {
        clauses: texts
            .into_iter()
            .map(|(strategy, leg, text)| Clause {
                id: ClauseRef::new(strategy, leg),
                strategy_id: strategy,
                text,
                predicate: ClausePredicate {
                    strategy,
                    direction: leg.direction(),
                },
            })
            .collect(),
    }
}
