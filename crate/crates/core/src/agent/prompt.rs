use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::market_data::MarketState;
use crate::strategy::ClauseLibrary;

/// Interaction mode, in ascending order of strategic constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Free,
    Guided,
    Strict,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Free, Mode::Guided, Mode::Strict];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Free => "free",
            Mode::Guided => "guided",
            Mode::Strict => "strict",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "free" => Ok(Mode::Free),
            "guided" => Ok(Mode::Guided),
            "strict" => Ok(Mode::Strict),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub mode: Mode,
    pub system_text: String,
    pub user_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptOptions {
    pub news_digest_limit: usize,
    pub bar_digest_len: usize,
}

impl Default for PromptOptions {
    fn default() -> Self {
        Self {
            news_digest_limit: 10,
            bar_digest_len: 20,
        }
    }
}

pub const DECISION_SCHEMA: &str = r#"{"action": -1|0|1, "quantity": int>=0 (optional), "rationale": string, "cited_clauses": [string] (optional)}"#;

pub const GUIDED_MARKER: &str = "as reference, allowing adjustment for current news";
pub const STRICT_MANDATE: &str = "the rationale must explicitly cite specific clauses";

const PREAMBLE: &str = "You are a trading agent managing a single-stock cash account. \
After the close of each trading day you choose one action, which is executed at the opening price of the next trading day (T+1) with transaction costs deducted. \
Buys without a quantity use the maximum affordable whole shares; sells without a quantity close the whole position. Short selling is not available.";

fn fmt_money(x: f64) -> String {
    format!("{x:.2}")
}

/// Builds the mode-specific prompt for one decision day.
pub fn build_prompt(mode: Mode, state: &MarketState, clauses: &ClauseLibrary, options: &PromptOptions) -> PromptBundle {
    let mut system = String::from(PREAMBLE);
    system.push_str("\n\n");
    match mode {
        Mode::Free => {
            system.push_str(
                "Decide using your own market judgement from the price history, news and fundamentals provided. No predefined trading strategy is supplied.\n",
            );
        }
        Mode::Guided => {
            let _ = write!(
                system,
                "The strategy library below is provided {GUIDED_MARKER}. Treat each clause as a reference rule: you may follow it, or adjust and override it when real-time news or fundamentals justify doing so.\n\nStrategy library (reference):\n{}",
                clauses.render_text()
            );
        }
        Mode::Strict => {
            let _ = write!(
                system,
                "You must strictly adhere to the strategy library below. Trade only when the conditions of a clause are met on the current day; otherwise hold. Do not act on intuition or news that no clause covers.\n\nStrategy library (mandatory):\n{}\nCompliance requirement: {STRICT_MANDATE} from the strategy library by their ids (for example S2.entry). Any action other than 0 must list the justifying clause ids in cited_clauses.\n",
                clauses.render_text()
            );
        }
    }
    system.push_str("\nRespond with exactly one JSON object matching the output schema given in the user message.");

    let mut user = String::new();
    let holding = state.holding();
    let _ = writeln!(user, "Ticker: {}", state.ticker());
    let _ = writeln!(user, "Decision date (after close): {}", state.gate_day());

    let bars = state.bars();
    let tail = &bars[bars.len().saturating_sub(options.bar_digest_len)..];
    let _ = writeln!(user, "\nRecent daily bars (oldest first, last {}):", tail.len());
    user.push_str("date,open,high,low,close,volume\n");
    for b in tail {
        let _ = writeln!(
            user,
            "{},{:.4},{:.4},{:.4},{:.4},{}",
            b.trading_day, b.open, b.high, b.low, b.close, b.volume
        );
    }

    let news = state.news();
    let _ = writeln!(
        user,
        "\nNews (most recent first, up to {}):",
        options.news_digest_limit
    );
    if news.is_empty() || options.news_digest_limit == 0 {
        user.push_str("- none\n");
    }
    for item in news.iter().rev().take(options.news_digest_limit) {
        let events = if item.key_events.is_empty() {
            String::from("none")
        } else {
            item.key_events.join(", ")
        };
        let _ = writeln!(
            user,
            "- [{}] {} (sentiment {:+.2}; key events: {}): {}",
            item.available_at.to_rfc3339(),
            item.headline,
            item.sentiment,
            events,
            item.summary
        );
    }

    user.push_str("\nFundamentals on file:\n");
    if state.fundamentals().is_empty() {
        user.push_str("- none\n");
    }
    for doc in state.fundamentals().iter().rev() {
        let _ = writeln!(user, "- published {}:", doc.published_on);
        for section in &doc.section_summaries {
            let _ = writeln!(user, "  * {}: {}", section.name, section.text);
        }
    }

    user.push_str("\nCurrent holding state:\n");
    let _ = writeln!(user, "cash: {}", fmt_money(holding.cash));
    let _ = writeln!(user, "shares: {}", holding.shares);
    let _ = writeln!(
        user,
        "average cost: {}",
        holding.avg_cost.map_or_else(|| "n/a".to_string(), fmt_money)
    );
    let _ = writeln!(user, "realized PnL: {}", fmt_money(holding.realized_pnl));
    let _ = writeln!(user, "unrealized PnL: {}", fmt_money(holding.unrealized_pnl));
    let _ = writeln!(user, "cumulative costs: {}", fmt_money(holding.cum_costs));
    let _ = writeln!(user, "equity: {}", fmt_money(holding.equity()));

    let _ = writeln!(user, "\nOutput schema (JSON): {DECISION_SCHEMA}");
    user.push_str("action: 1 = buy, -1 = sell, 0 = hold.\n");
    if mode == Mode::Strict {
        let _ = writeln!(
            user,
            "Strict mode: {STRICT_MANDATE} from the strategy library. For any action other than 0, cited_clauses must be non-empty and contain the ids of the clauses whose conditions are met today."
        );
    }

    PromptBundle {
        mode,
        system_text: system,
        user_text: user,
    }
}
