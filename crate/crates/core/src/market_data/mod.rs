//! Market records and the point-in-time gate.
//!
//! Three record streams are ingested: daily OHLCV bars (CSV), news items
//! (JSON Lines) and pre-summarized fundamental documents (JSON). The
//! [`MarketStore`] holds them immutably; agents only ever see a
//! [`MarketState`] produced by [`MarketStore::gated_view`], which contains
//! nothing stamped after the gate day.

mod records;
mod store;
mod windows;

pub use records::{load_bars, load_fundamentals, load_news, Bar, FundamentalDoc, NewsItem, Section};
pub use store::{MarketClock, MarketState, MarketStore};
pub use windows::{slice_windows, EvaluationWindow, WindowConfig, WindowKind};

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("dates not strictly increasing: {prev} followed by {next}")]
    NonMonotonicDates { prev: NaiveDate, next: NaiveDate },
    #[error("duplicate bar for {ticker} on {day}")]
    DuplicateBar { ticker: String, day: NaiveDate },
    #[error("non-positive price at line {line}: {field} = {value}")]
    NonPositivePrice { line: usize, field: &'static str, value: f64 },
    #[error("sentiment {value} out of [-1, 1] at line {line}")]
    SentimentOutOfRange { line: usize, value: f64 },
    #[error("unknown trading day {day} for {ticker}")]
    UnknownTradingDay { ticker: String, day: NaiveDate },
    #[error("look-ahead violation: record dated {record} requested through a view gated at {gate}")]
    LookAheadViolation { gate: NaiveDate, record: String },
    #[error("calendar has {available} trading days, {required} required")]
    CalendarTooShort { required: usize, available: usize },
    #[error("windows {first} and {second} overlap")]
    OverlappingWindows { first: String, second: String },
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("i/o error: {0}")]
    Io(String),
}
