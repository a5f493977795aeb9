use chrono::NaiveDate;

use crate::execution::HoldingState;
use crate::market_data::{Bar, MarketState};

pub(crate) fn bars_from(
    closes: &[f64],
    highs: Option<&[f64]>,
    lows: Option<&[f64]>,
    volumes: Option<&[u64]>,
) -> Vec<Bar> {
    let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
    closes
        .iter()
        .enumerate()
        .map(|(i, &c)| Bar {
            ticker: "T".into(),
            trading_day: start + chrono::Days::new(i as u64),
            open: c,
            high: highs.map_or(c, |h| h[i]).max(c),
            low: lows.map_or(c, |l| l[i]).min(c),
            close: c,
            volume: volumes.map_or(1000, |v| v[i]),
        })
        .collect()
}

pub(crate) fn state_from_bars(bars: Vec<Bar>, holding: HoldingState) -> MarketState {
    MarketState::from_bars("T", bars, holding).unwrap()
}

pub(crate) fn state_from_closes(closes: &[f64], holding: HoldingState) -> MarketState {
    state_from_bars(bars_from(closes, None, None, None), holding)
}
