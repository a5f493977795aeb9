use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read};

use chrono::{DateTime, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};

use super::DataError;

const BAR_HEADER: [&str; 7] = ["ticker", "date", "open", "high", "low", "close", "volume"];

/// One daily OHLCV bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub ticker: String,
    pub trading_day: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsItem {
    pub ticker: String,
    pub available_at: DateTime<FixedOffset>,
    pub headline: String,
    pub summary: String,
    pub sentiment: f64,
    pub key_events: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub text: String,
}

/// A pre-summarized annual report or filing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalDoc {
    pub ticker: String,
    pub published_on: NaiveDate,
    #[serde(rename = "sections")]
    pub section_summaries: Vec<Section>,
}

fn malformed(line: usize, reason: impl Into<String>) -> DataError {
    DataError::MalformedRecord {
        line,
        reason: reason.into(),
    }
}

fn parse_price(line: usize, field: &'static str, raw: &str) -> Result<f64, DataError> {
    let value: f64 = raw
        .trim()
        .parse()
        .map_err(|_| malformed(line, format!("{field}: cannot parse {raw:?} as a number")))?;
    if !value.is_finite() {
        return Err(malformed(line, format!("{field}: non-finite value")));
    }
    if value <= 0.0 {
        return Err(DataError::NonPositivePrice { line, field, value });
    }
    Ok(value)
}

fn parse_volume(line: usize, raw: &str) -> Result<u64, DataError> {
    // Accepts exponent notation ("1e6") as long as the value is a whole count.
    let value: f64 = raw
        .trim()
        .parse()
        .map_err(|_| malformed(line, format!("volume: cannot parse {raw:?}")))?;
    if !value.is_finite() || value < 0.0 || value.fract() != 0.0 || value > u64::MAX as f64 {
        return Err(malformed(line, format!("volume: {raw:?} is not a non-negative integer")));
    }
    Ok(value as u64)
}

/// Reads the bar CSV (`ticker,date,open,high,low,close,volume`).
///
/// Rows may appear in any order; the result is sorted by trading day and
/// then ticker. A repeated `(ticker, date)` pair is rejected.
pub fn load_bars<R: Read>(source: R) -> Result<Vec<Bar>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader
        .headers()
        .map_err(|e| malformed(1, format!("header: {e}")))?
        .clone();
    if header.len() != BAR_HEADER.len() || header.iter().zip(BAR_HEADER).any(|(a, b)| a != b) {
        return Err(malformed(
            1,
            format!("expected header {:?}, found {:?}", BAR_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut bars = Vec::new();
    let mut seen = HashSet::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| malformed(line, e.to_string()))?;
        if record.len() != BAR_HEADER.len() {
            return Err(malformed(line, format!("expected 7 fields, found {}", record.len())));
        }
        let ticker = record[0].to_string();
        if ticker.is_empty() {
            return Err(malformed(line, "empty ticker"));
        }
        let trading_day = NaiveDate::parse_from_str(&record[1], "%Y-%m-%d")
            .map_err(|e| malformed(line, format!("date {:?}: {e}", &record[1])))?;
        let open = parse_price(line, "open", &record[2])?;
        let high = parse_price(line, "high", &record[3])?;
        let low = parse_price(line, "low", &record[4])?;
        let close = parse_price(line, "close", &record[5])?;
        let volume = parse_volume(line, &record[6])?;

        if low > high {
            return Err(malformed(line, format!("low {low} above high {high}")));
        }
        if low > open.min(close) {
            return Err(malformed(line, format!("low {low} above min(open, close)")));
        }
        if high < open.max(close) {
            return Err(malformed(line, format!("high {high} below max(open, close)")));
        }
        if !seen.insert((ticker.clone(), trading_day)) {
            return Err(DataError::DuplicateBar {
                ticker,
                day: trading_day,
            });
        }
        bars.push(Bar {
            ticker,
            trading_day,
            open,
            high,
            low,
            close,
            volume,
        });
    }
    bars.sort_by(|a, b| {
        a.trading_day
            .cmp(&b.trading_day)
            .then_with(|| a.ticker.cmp(&b.ticker))
    });
    Ok(bars)
}

#[derive(Deserialize)]
struct RawNews {
    ticker: String,
    available_at: String,
    headline: String,
    #[serde(default)]
    summary: String,
    sentiment: f64,
    #[serde(default)]
    key_events: Vec<String>,
}

/// Reads the news JSON Lines stream. Blank lines are skipped; an empty
/// stream is a valid, empty collection.
pub fn load_news<R: Read>(source: R) -> Result<Vec<NewsItem>, DataError> {
    let reader = BufReader::new(source);
    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| DataError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawNews =
            serde_json::from_str(&line).map_err(|e| malformed(line_no, e.to_string()))?;
        let available_at = DateTime::parse_from_rfc3339(raw.available_at.trim()).map_err(|e| {
            malformed(
                line_no,
                format!("available_at {:?} is not ISO-8601 with offset: {e}", raw.available_at),
            )
        })?;
        if !raw.sentiment.is_finite() || !(-1.0..=1.0).contains(&raw.sentiment) {
            return Err(DataError::SentimentOutOfRange {
                line: line_no,
                value: raw.sentiment,
            });
        }
        if raw.ticker.is_empty() {
            return Err(malformed(line_no, "empty ticker"));
        }
        items.push(NewsItem {
            ticker: raw.ticker,
            available_at,
            headline: raw.headline,
            summary: raw.summary,
            sentiment: raw.sentiment,
            key_events: raw.key_events,
        });
    }
    // Stable: items sharing a timestamp keep file order.
    items.sort_by_key(|n| n.available_at);
    Ok(items)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawDocs {
    Many(Vec<FundamentalDoc>),
    One(FundamentalDoc),
}

/// Reads the fundamentals JSON: either a single document object or an array
/// of them. Sorted by publication date.
pub fn load_fundamentals<R: Read>(source: R) -> Result<Vec<FundamentalDoc>, DataError> {
    let mut text = String::new();
    BufReader::new(source)
        .read_to_string(&mut text)
        .map_err(|e| DataError::Io(e.to_string()))?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let raw: RawDocs = serde_json::from_str(&text).map_err(|e| malformed(e.line(), e.to_string()))?;
    let mut docs = match raw {
        RawDocs::Many(d) => d,
        RawDocs::One(d) => vec![d],
    };
    docs.sort_by(|a, b| {
        a.published_on
            .cmp(&b.published_on)
            .then_with(|| a.ticker.cmp(&b.ticker))
    });
    Ok(docs)
}
