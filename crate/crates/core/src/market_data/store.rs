use std::collections::BTreeMap;

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveTime, TimeZone};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Bar, DataError, FundamentalDoc, NewsItem};
use crate::execution::HoldingState;

/// Wall-clock position of the market close, used to gate news.
///
/// The offset is fixed; markets observing daylight saving need the offset
/// of the evaluation period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketClock {
    #[serde(default = "default_close_time")]
    pub close_time: NaiveTime,
    #[serde(default)]
    pub utc_offset_minutes: i32,
}

fn default_close_time() -> NaiveTime {
    NaiveTime::from_hms_opt(16, 0, 0).unwrap()
}

impl Default for MarketClock {
    fn default() -> Self {
        Self {
            close_time: default_close_time(),
            utc_offset_minutes: 0,
        }
    }
}

impl MarketClock {
    pub fn offset(&self) -> FixedOffset {
        FixedOffset::east_opt(self.utc_offset_minutes * 60).unwrap_or_else(|| FixedOffset::east_opt(0).unwrap())
    }

    /// Close-of-session timestamp for `day`. News stamped at or before this
    /// instant is visible to a decision taken on `day`.
    pub fn close_of(&self, day: NaiveDate) -> DateTime<FixedOffset> {
        self.offset()
            .from_local_datetime(&day.and_time(self.close_time))
            .single()
            .expect("fixed offsets have no ambiguous local times")
    }
}

/// Immutable record store for one market.
#[derive(Debug, Clone, Default)]
pub struct MarketStore {
    clock: MarketClock,
    bars: BTreeMap<String, Vec<Bar>>,
    news: BTreeMap<String, Vec<NewsItem>>,
    fundamentals: BTreeMap<String, Vec<FundamentalDoc>>,
}

impl MarketStore {
    pub fn new(
        bars: Vec<Bar>,
        news: Vec<NewsItem>,
        fundamentals: Vec<FundamentalDoc>,
        clock: MarketClock,
    ) -> Result<Self, DataError> {
        let mut by_ticker: BTreeMap<String, Vec<Bar>> = BTreeMap::new();
        for bar in bars {
            by_ticker.entry(bar.ticker.clone()).or_default().push(bar);
        }
        for series in by_ticker.values_mut() {
            series.sort_by_key(|b| b.trading_day);
            for pair in series.windows(2) {
                if pair[0].trading_day == pair[1].trading_day {
                    return Err(DataError::DuplicateBar {
                        ticker: pair[0].ticker.clone(),
                        day: pair[0].trading_day,
                    });
                }
            }
        }
        let mut news_by: BTreeMap<String, Vec<NewsItem>> = BTreeMap::new();
        for item in news {
            news_by.entry(item.ticker.clone()).or_default().push(item);
        }
        for items in news_by.values_mut() {
            items.sort_by_key(|n| n.available_at);
        }
        let mut docs_by: BTreeMap<String, Vec<FundamentalDoc>> = BTreeMap::new();
        for doc in fundamentals {
            docs_by.entry(doc.ticker.clone()).or_default().push(doc);
        }
        for docs in docs_by.values_mut() {
            docs.sort_by_key(|d| d.published_on);
        }
        Ok(Self {
            clock,
            bars: by_ticker,
            news: news_by,
            fundamentals: docs_by,
        })
    }

    pub fn clock(&self) -> &MarketClock {
        &self.clock
    }

    pub fn tickers(&self) -> impl Iterator<Item = &str> {
        self.bars.keys().map(String::as_str)
    }

    pub fn bars(&self, ticker: &str) -> &[Bar] {
        self.bars.get(ticker).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn news(&self, ticker: &str) -> &[NewsItem] {
        self.news.get(ticker).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn fundamentals(&self, ticker: &str) -> &[FundamentalDoc] {
        self.fundamentals.get(ticker).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Trading calendar for `ticker`: the days on which it has a bar.
    pub fn calendar(&self, ticker: &str) -> Vec<NaiveDate> {
        self.bars(ticker).iter().map(|b| b.trading_day).collect()
    }

    pub fn bar_on(&self, ticker: &str, day: NaiveDate) -> Option<&Bar> {
        let bars = self.bars(ticker);
        bars.binary_search_by_key(&day, |b| b.trading_day)
            .ok()
            .map(|i| &bars[i])
    }

    /// Point-in-time view of `ticker` as of the close of `gate_day`.
    pub fn gated_view(
        &self,
        ticker: &str,
        gate_day: NaiveDate,
        holding: HoldingState,
    ) -> Result<MarketState, DataError> {
        let bars = self.bars(ticker);
        if bars
            .binary_search_by_key(&gate_day, |b| b.trading_day)
            .is_err()
        {
            return Err(DataError::UnknownTradingDay {
                ticker: ticker.to_string(),
                day: gate_day,
            });
        }
        let gate_close = self.clock.close_of(gate_day);

        let bar_end = bars.partition_point(|b| b.trading_day <= gate_day);
        let news = self.news(ticker);
        let news_end = news.partition_point(|n| n.available_at <= gate_close);
        let docs = self.fundamentals(ticker);
        let docs_end = docs.partition_point(|d| d.published_on <= gate_day);

        let state = MarketState {
            ticker: ticker.to_string(),
            gate_day,
            gate_close,
            bars_history: bars[..bar_end].to_vec(),
            news_visible: news[..news_end].to_vec(),
            fundamentals_visible: docs[..docs_end].to_vec(),
            holding,
        };
        state.verify_gate()?;
        Ok(state)
    }
}

/// What an agent sees on one decision day. Fields are private: a state can
/// only be built by gating a store or from a bar prefix, so nothing past the
/// gate can be smuggled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketState {
    ticker: String,
    gate_day: NaiveDate,
    gate_close: DateTime<FixedOffset>,
    bars_history: Vec<Bar>,
    news_visible: Vec<NewsItem>,
    fundamentals_visible: Vec<FundamentalDoc>,
    holding: HoldingState,
}

impl MarketState {
    /// Builds a state gated at the last bar. News and fundamentals are empty.
    /// Mostly useful for evaluating strategies on raw series.
    pub fn from_bars(ticker: &str, bars: Vec<Bar>, holding: HoldingState) -> Result<Self, DataError> {
        let Some(last) = bars.last() else {
            return Err(DataError::InvalidWindow("a state needs at least one bar".into()));
        };
        for pair in bars.windows(2) {
            if pair[1].trading_day <= pair[0].trading_day {
                return Err(DataError::NonMonotonicDates {
                    prev: pair[0].trading_day,
                    next: pair[1].trading_day,
                });
            }
        }
        let gate_day = last.trading_day;
        let state = Self {
            ticker: ticker.to_string(),
            gate_day,
            gate_close: MarketClock::default().close_of(gate_day),
            bars_history: bars,
            news_visible: Vec::new(),
            fundamentals_visible: Vec::new(),
            holding,
        };
        state.verify_gate()?;
        Ok(state)
    }

    fn verify_gate(&self) -> Result<(), DataError> {
        for pair in self.bars_history.windows(2) {
            if pair[1].trading_day <= pair[0].trading_day {
                return Err(DataError::NonMonotonicDates {
                    prev: pair[0].trading_day,
                    next: pair[1].trading_day,
                });
            }
        }
        let violation = |record: String| DataError::LookAheadViolation {
            gate: self.gate_day,
            record,
        };
        if let Some(b) = self.bars_history.iter().find(|b| b.trading_day > self.gate_day) {
            return Err(violation(format!("bar {}", b.trading_day)));
        }
        if let Some(n) = self.news_visible.iter().find(|n| n.available_at > self.gate_close) {
            return Err(violation(format!("news {}", n.available_at.to_rfc3339())));
        }
        if let Some(d) = self
            .fundamentals_visible
            .iter()
            .find(|d| d.published_on > self.gate_day)
        {
            return Err(violation(format!("fundamentals {}", d.published_on)));
        }
        Ok(())
    }

    pub fn ticker(&self) -> &str {
        &self.ticker
    }

    pub fn gate_day(&self) -> NaiveDate {
        self.gate_day
    }

    pub fn gate_close(&self) -> DateTime<FixedOffset> {
        self.gate_close
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars_history
    }

    pub fn news(&self) -> &[NewsItem] {
        &self.news_visible
    }

    pub fn fundamentals(&self) -> &[FundamentalDoc] {
        &self.fundamentals_visible
    }

    pub fn holding(&self) -> &HoldingState {
        &self.holding
    }

    pub fn latest_bar(&self) -> &Bar {
        self.bars_history
            .last()
            .expect("a state always holds the gate-day bar")
    }

    pub fn closes(&self) -> impl DoubleEndedIterator<Item = f64> + ExactSizeIterator + '_ {
        self.bars_history.iter().map(|b| b.close)
    }

    /// Looks up the bar for `day`. Any day after the gate is a hard error.
    pub fn bar_on(&self, day: NaiveDate) -> Result<&Bar, DataError> {
        if day > self.gate_day {
            return Err(DataError::LookAheadViolation {
                gate: self.gate_day,
                record: format!("bar {day}"),
            });
        }
        self.bars_history
            .binary_search_by_key(&day, |b| b.trading_day)
            .map(|i| &self.bars_history[i])
            .map_err(|_| DataError::UnknownTradingDay {
                ticker: self.ticker.clone(),
                day,
            })
    }

    /// News available at or before `at`. Asking past the gate close is a
    /// hard error.
    pub fn news_until(&self, at: DateTime<FixedOffset>) -> Result<&[NewsItem], DataError> {
        if at > self.gate_close {
            return Err(DataError::LookAheadViolation {
                gate: self.gate_day,
                record: format!("news until {}", at.to_rfc3339()),
            });
        }
        let end = self.news_visible.partition_point(|n| n.available_at <= at);
        Ok(&self.news_visible[..end])
    }

    /// Number of trading days elapsed since the open position was filled,
    /// counting the gate day but not the fill day.
    pub fn days_held(&self) -> Option<usize> {
        let opened = self.holding.opened_on?;
        if self.holding.shares == 0 {
            return None;
        }
        Some(
            self.bars_history
                .iter()
                .filter(|b| b.trading_day > opened)
                .count(),
        )
    }

    /// Stable SHA-256 of the serialized state.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("market state serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
