//! Seeded synthetic market data for tests, benchmarks and offline demos.

use std::io::{self, Write};

use chrono::{Datelike, Days, NaiveDate, NaiveTime, TimeZone, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::market_data::{Bar, FundamentalDoc, MarketClock, NewsItem, Section};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub ticker: String,
    pub first_day: NaiveDate,
    pub n_days: usize,
    pub start_price: f64,
    /// Mean daily log return.
    pub drift: f64,
    /// Standard deviation of daily log returns.
    pub volatility: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(ticker: impl Into<String>, n_days: usize, seed: u64) -> Self {
        Self {
            ticker: ticker.into(),
            first_day: NaiveDate::from_ymd_opt(2025, 1, 2).unwrap(),
            n_days,
            start_price: 100.0,
            drift: 0.0003,
            volatility: 0.018,
            seed,
        }
    }
}

/// `n` consecutive weekdays starting at `first` (or the next weekday).
pub fn weekday_calendar(first: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut days = Vec::with_capacity(n);
    let mut d = first;
    while days.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            days.push(d);
        }
        d = d + Days::new(1);
    }
    days
}

fn cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Approximately normal draw from the sum of twelve uniforms.
fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0
}

/// Geometric random-walk OHLCV bars on a weekday calendar.
pub fn random_walk_bars(spec: &SyntheticSpec) -> Vec<Bar> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut prev_close = spec.start_price;
    weekday_calendar(spec.first_day, spec.n_days)
        .into_iter()
        .map(|day| {
            let gap = spec.volatility * 0.3 * std_normal(&mut rng);
            let open = cents((prev_close * gap.exp()).max(0.01));
            let ret = spec.drift + spec.volatility * std_normal(&mut rng);
            let close = cents((open * ret.exp()).max(0.01));
            let wick_hi = 1.0 + spec.volatility * 0.5 * rng.random::<f64>();
            let wick_lo = 1.0 - spec.volatility * 0.5 * rng.random::<f64>();
            let high = cents(open.max(close) * wick_hi);
            let low = cents((open.min(close) * wick_lo).max(0.01));
            let volume = rng.random_range(500_000..5_000_000u64);
            prev_close = close;
            Bar {
                ticker: spec.ticker.clone(),
                trading_day: day,
                open,
                high,
                low,
                close,
                volume,
            }
        })
        .collect()
}

/// A few headlines per week, stamped at random times through the day so
/// some land after the close.
pub fn random_news(spec: &SyntheticSpec, clock: &MarketClock) -> Vec<NewsItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_0001);
    let offset = clock.offset();
    let mut out = Vec::new();
    for (i, day) in weekday_calendar(spec.first_day, spec.n_days).into_iter().enumerate() {
        if rng.random::<f64>() > 0.4 {
            continue;
        }
        let secs = rng.random_range(6 * 3600..22 * 3600u32);
        let time = NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).unwrap();
        let available_at = offset
            .from_local_datetime(&day.and_time(time))
            .single()
            .unwrap();
        let sentiment = (rng.random::<f64>() * 2.0 - 1.0).clamp(-1.0, 1.0);
        let tone = if sentiment >= 0.0 { "upbeat" } else { "cautious" };
        out.push(NewsItem {
            ticker: spec.ticker.clone(),
            available_at,
            headline: format!("{} item {i}: {tone} outlook", spec.ticker),
            summary: format!("Synthetic coverage of {} on {day}.", spec.ticker),
            sentiment: (sentiment * 1000.0).round() / 1000.0,
            key_events: if rng.random::<f64>() < 0.2 {
                vec!["guidance update".into()]
            } else {
                Vec::new()
            },
        });
    }
    out
}

/// One annual filing dated at the start of the series.
pub fn sample_fundamentals(spec: &SyntheticSpec) -> Vec<FundamentalDoc> {
    vec![FundamentalDoc {
        ticker: spec.ticker.clone(),
        published_on: spec.first_day,
        section_summaries: vec![
            Section {
                name: "business".into(),
                text: format!("{} operates a diversified synthetic business.", spec.ticker),
            },
            Section {
                name: "risk_factors".into(),
                text: "Demand is cyclical and margins depend on input costs.".into(),
            },
        ],
    }]
}

pub fn write_bars_csv<W: Write>(bars: &[Bar], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ticker", "date", "open", "high", "low", "close", "volume"])?;
    for b in bars {
        w.write_record([
            b.ticker.clone(),
            b.trading_day.to_string(),
            b.open.to_string(),
            b.high.to_string(),
            b.low.to_string(),
            b.close.to_string(),
            b.volume.to_string(),
        ])?;
    }
    w.flush()
}

pub fn write_news_jsonl<W: Write>(news: &[NewsItem], mut out: W) -> io::Result<()> {
    for item in news {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{load_bars, load_news};

    #[test]
    fn deterministic_and_valid() {
        let spec = SyntheticSpec::new("SYN", 130, 7);
        let a = random_walk_bars(&spec);
        assert_eq!(a, random_walk_bars(&spec));
        assert_ne!(a, random_walk_bars(&SyntheticSpec { seed: 8, ..spec.clone() }));
        assert_eq!(a.len(), 130);
        for b in &a {
            assert!(b.low <= b.open.min(b.close) && b.high >= b.open.max(b.close));
            assert!(b.low > 0.0);
            assert!(!matches!(b.trading_day.weekday(), Weekday::Sat | Weekday::Sun));
        }
    }

    #[test]
    fn files_round_trip_through_loaders() {
        let spec = SyntheticSpec::new("SYN", 40, 3);
        let bars = random_walk_bars(&spec);
        let mut buf = Vec::new();
        write_bars_csv(&bars, &mut buf).unwrap();
        assert_eq!(load_bars(buf.as_slice()).unwrap(), bars);

        let news = random_news(&spec, &MarketClock::default());
        let mut buf = Vec::new();
        write_news_jsonl(&news, &mut buf).unwrap();
        let mut loaded = load_news(buf.as_slice()).unwrap();
        let mut expected = news.clone();
        loaded.sort_by_key(|n| n.available_at);
        expected.sort_by_key(|n| n.available_at);
        assert_eq!(loaded, expected);
    }
}
