use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    ShortTactical,
    LongStrategic,
}

impl WindowKind {
    /// Allowed window lengths, in trading days.
    pub fn length_bounds(self) -> (usize, usize) {
        match self {
            WindowKind::ShortTactical => (10, 20),
            WindowKind::LongStrategic => (80, 100),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WindowKind::ShortTactical => "short_tactical",
            WindowKind::LongStrategic => "long_strategic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationWindow {
    pub label: String,
    pub kind: WindowKind,
    pub trading_days: Vec<NaiveDate>,
}

impl EvaluationWindow {
    pub fn new(label: impl Into<String>, kind: WindowKind, trading_days: Vec<NaiveDate>) -> Result<Self, DataError> {
        let label = label.into();
        for pair in trading_days.windows(2) {
            if pair[1] <= pair[0] {
                return Err(DataError::NonMonotonicDates {
                    prev: pair[0],
                    next: pair[1],
                });
            }
        }
        let (lo, hi) = kind.length_bounds();
        if !(lo..=hi).contains(&trading_days.len()) {
            return Err(DataError::InvalidWindow(format!(
                "{label}: {} window must span {lo}-{hi} trading days, got {}",
                kind.as_str(),
                trading_days.len()
            )));
        }
        Ok(Self {
            label,
            kind,
            trading_days,
        })
    }

    pub fn len(&self) -> usize {
        self.trading_days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trading_days.is_empty()
    }

    pub fn first_day(&self) -> NaiveDate {
        self.trading_days[0]
    }

    pub fn last_day(&self) -> NaiveDate {
        *self.trading_days.last().expect("windows are non-empty")
    }
}

/// Window layout for one market.
///
/// Explicit start dates place windows; without them short windows are laid
/// back to back after `warmup_days` and long windows are anchored at the end
/// of the calendar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    #[serde(default = "default_short_count")]
    pub short_count: usize,
    #[serde(default = "default_short_length")]
    pub short_length: usize,
    #[serde(default)]
    pub short_starts: Vec<NaiveDate>,
    #[serde(default = "default_long_count")]
    pub long_count: usize,
    #[serde(default = "default_long_length")]
    pub long_length: usize,
    #[serde(default)]
    pub long_starts: Vec<NaiveDate>,
    #[serde(default)]
    pub warmup_days: usize,
}

fn default_short_count() -> usize {
    3
}
fn default_short_length() -> usize {
    15
}
fn default_long_count() -> usize {
    1
}
fn default_long_length() -> usize {
    90
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            short_count: default_short_count(),
            short_length: default_short_length(),
            short_starts: Vec::new(),
            long_count: default_long_count(),
            long_length: default_long_length(),
            long_starts: Vec::new(),
            warmup_days: 0,
        }
    }
}

fn start_index(calendar: &[NaiveDate], start: NaiveDate) -> Result<usize, DataError> {
    calendar
        .binary_search(&start)
        .map_err(|_| DataError::InvalidWindow(format!("start {start} is not a trading day in the calendar")))
}

fn take(calendar: &[NaiveDate], start: usize, len: usize) -> Result<Vec<NaiveDate>, DataError> {
    let end = start + len;
    if end > calendar.len() {
        return Err(DataError::CalendarTooShort {
            required: end,
            available: calendar.len(),
        });
    }
    Ok(calendar[start..end].to_vec())
}

/// Cuts the configured short and long windows out of a trading calendar.
pub fn slice_windows(calendar: &[NaiveDate], config: &WindowConfig) -> Result<Vec<EvaluationWindow>, DataError> {
    for pair in calendar.windows(2) {
        if pair[1] <= pair[0] {
            return Err(DataError::NonMonotonicDates {
                prev: pair[0],
                next: pair[1],
            });
        }
    }
    for (kind, count, starts) in [
        (WindowKind::ShortTactical, config.short_count, &config.short_starts),
        (WindowKind::LongStrategic, config.long_count, &config.long_starts),
    ] {
        if !starts.is_empty() && starts.len() != count {
            return Err(DataError::InvalidWindow(format!(
                "{} windows: {count} requested but {} start dates given",
                kind.as_str(),
                starts.len()
            )));
        }
    }

    let mut shorts = Vec::with_capacity(config.short_count);
    if config.short_starts.is_empty() {
        let required = config.warmup_days + config.short_count * config.short_length;
        if required > calendar.len() {
            return Err(DataError::CalendarTooShort {
                required,
                available: calendar.len(),
            });
        }
        for i in 0..config.short_count {
            let start = config.warmup_days + i * config.short_length;
            shorts.push((start, take(calendar, start, config.short_length)?));
        }
    } else {
        for start in &config.short_starts {
            let idx = start_index(calendar, *start)?;
            shorts.push((idx, take(calendar, idx, config.short_length)?));
        }
    }

    let mut longs = Vec::with_capacity(config.long_count);
    if config.long_starts.is_empty() {
        let span = config.long_count * config.long_length;
        let required = config.warmup_days + span;
        if required > calendar.len() {
            return Err(DataError::CalendarTooShort {
                required,
                available: calendar.len(),
            });
        }
        for i in 0..config.long_count {
            let start = calendar.len() - span + i * config.long_length;
            longs.push(take(calendar, start, config.long_length)?);
        }
    } else {
        for start in &config.long_starts {
            let idx = start_index(calendar, *start)?;
            longs.push(take(calendar, idx, config.long_length)?);
        }
    }

    let mut windows = Vec::with_capacity(shorts.len() + longs.len());
    for (i, (_, days)) in shorts.iter().enumerate() {
        windows.push(EvaluationWindow::new(
            format!("short-{}", i + 1),
            WindowKind::ShortTactical,
            days.clone(),
        )?);
    }

    let mut order: Vec<usize> = (0..shorts.len()).collect();
    order.sort_by_key(|&i| shorts[i].0);
    for pair in order.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if shorts[a].0 + config.short_length > shorts[b].0 {
            return Err(DataError::OverlappingWindows {
                first: windows[a].label.clone(),
                second: windows[b].label.clone(),
            });
        }
    }

    for (i, days) in longs.into_iter().enumerate() {
        windows.push(EvaluationWindow::new(
            format!("long-{}", i + 1),
            WindowKind::LongStrategic,
            days,
        )?);
    }
    Ok(windows)
}
