use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::agent::{Action, Decision};

/// Account state fed back to the agent each day.
///
/// `avg_cost` is the fee-inclusive cost basis per share, so
/// `cash + shares * avg_cost - initial_cash == realized_pnl` holds after
/// every fill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldingState {
    pub cash: f64,
    pub shares: u64,
    pub avg_cost: Option<f64>,
    pub realized_pnl: f64,
    pub unrealized_pnl: f64,
    pub cum_costs: f64,
    /// Fill day of the first share of the current position.
    pub opened_on: Option<NaiveDate>,
    /// Price of the last mark (close, or fill price right after a fill).
    pub mark_price: Option<f64>,
}

impl HoldingState {
    pub fn new(cash: f64) -> Self {
        Self {
            cash,
            shares: 0,
            avg_cost: None,
            realized_pnl: 0.0,
            unrealized_pnl: 0.0,
            cum_costs: 0.0,
            opened_on: None,
            mark_price: None,
        }
    }

    pub fn equity(&self) -> f64 {
        match self.mark_price {
            Some(p) if self.shares > 0 => self.cash + self.shares as f64 * p,
            _ => self.cash,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    /// Fraction of notional charged on each side.
    #[serde(default = "default_fee_rate")]
    pub fee_rate: f64,
}

fn default_fee_rate() -> f64 {
    0.001
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            fee_rate: default_fee_rate(),
        }
    }
}

impl CostModel {
    pub fn is_valid(&self) -> bool {
        self.fee_rate.is_finite() && self.fee_rate >= 0.0
    }

    /// Cash needed to buy `qty` shares at `price`, fee included.
    pub fn buy_outlay(&self, qty: u64, price: f64) -> f64 {
        let notional = qty as f64 * price;
        notional + self.fee_rate * notional
    }

    /// Largest whole-share quantity whose outlay fits in `cash`.
    pub fn max_affordable(&self, cash: f64, price: f64) -> u64 {
        if cash <= 0.0 {
            return 0;
        }
        let mut qty = (cash / (price * (1.0 + self.fee_rate))).floor().max(0.0) as u64;
        // Nudge past rounding in the division so the bound is exact
        // against the outlay actually charged.
        while qty > 0 && self.buy_outlay(qty, price) > cash {
            qty -= 1;
        }
        while self.buy_outlay(qty + 1, price) <= cash {
            qty += 1;
        }
        qty
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillReport {
    pub trading_day: NaiveDate,
    pub side: Side,
    pub requested_qty: Option<u64>,
    pub filled_qty: u64,
    pub fill_price: f64,
    pub fee: f64,
    pub truncated: bool,
}

/// Fills `decision` at `open_next`, the opening price of the next trading
/// day. Buys without a quantity take the maximum affordable size; sells
/// without one liquidate the position. Oversized requests are truncated,
/// never rejected.
pub fn execute_fill(
    holding: &HoldingState,
    decision: &Decision,
    open_next: f64,
    fill_day: NaiveDate,
    cost: &CostModel,
) -> (HoldingState, FillReport) {
    assert!(open_next > 0.0, "fill price must be positive");
    let mut h = holding.clone();
    let mut report = FillReport {
        trading_day: fill_day,
        side: Side::None,
        requested_qty: decision.quantity,
        filled_qty: 0,
        fill_price: open_next,
        fee: 0.0,
        truncated: false,
    };

    match decision.action {
        Action::Hold => {
            report.requested_qty = None;
            return (h, report);
        }
        Action::Buy => {
            report.side = Side::Buy;
            let affordable = cost.max_affordable(h.cash, open_next);
            let filled = match decision.quantity {
                Some(q) => q.min(affordable),
                None => affordable,
            };
            report.truncated = match decision.quantity {
                Some(q) => filled < q,
                None => true,
            };
            if filled > 0 {
                let notional = filled as f64 * open_next;
                let fee = cost.fee_rate * notional;
                let outlay = notional + fee;
                let basis = h.avg_cost.unwrap_or(0.0) * h.shares as f64;
                if h.shares == 0 {
                    h.opened_on = Some(fill_day);
                }
                h.cash -= outlay;
                h.shares += filled;
                h.avg_cost = Some((basis + outlay) / h.shares as f64);
                h.cum_costs += fee;
                report.filled_qty = filled;
                report.fee = fee;
            }
        }
        Action::Sell => {
            report.side = Side::Sell;
            let requested = decision.quantity.unwrap_or(h.shares);
            let filled = requested.min(h.shares);
            report.truncated = filled < requested || h.shares == 0;
            if filled > 0 {
                let notional = filled as f64 * open_next;
                let fee = cost.fee_rate * notional;
                let proceeds = notional - fee;
                let avg = h.avg_cost.expect("open positions carry a cost basis");
                h.cash += proceeds;
                h.realized_pnl += proceeds - filled as f64 * avg;
                h.shares -= filled;
                h.cum_costs += fee;
                if h.shares == 0 {
                    h.avg_cost = None;
                    h.opened_on = None;
                }
                report.filled_qty = filled;
                report.fee = fee;
            }
        }
    }
    (mark_to_market(&h, open_next), report)
}

/// Revalues the open position at `close`.
pub fn mark_to_market(holding: &HoldingState, close: f64) -> HoldingState {
    assert!(close > 0.0, "mark price must be positive");
    let mut h = holding.clone();
    h.unrealized_pnl = match (h.shares, h.avg_cost) {
        (0, _) | (_, None) => 0.0,
        (shares, Some(avg)) => shares as f64 * (close - avg),
    };
    h.mark_price = Some(close);
    h
}
