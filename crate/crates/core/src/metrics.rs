//! Performance metrics over an episode's close-of-day equity curve.
//!
//! Conventions: 252 trading days per year; returns are simple daily
//! returns of the equity curve; standard deviations use the sample (n-1)
//! denominator; alpha is the annualized excess over buy-and-hold of the
//! same asset. Degenerate ratios are reported as undefined with a reason,
//! never as zero.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::execution::{EpisodeLog, RoundTrip};

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum MetricsError {
    #[error("series too short: {got} points, {needed} needed")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("zero drawdown: calmar ratio undefined")]
    DegenerateDenominator,
    #[error("zero volatility")]
    DegenerateVolatility,
    #[error("no returns below the minimum acceptable return")]
    DegenerateDownside,
    #[error("series lengths differ: {left} vs {right}")]
    SeriesMismatch { left: usize, right: usize },
    #[error("no round trips")]
    NoRoundTrips,
}

impl MetricsError {
    pub fn reason(&self) -> UndefinedReason {
        match self {
            MetricsError::SeriesTooShort { .. } => UndefinedReason::SeriesTooShort,
            MetricsError::DegenerateDenominator => UndefinedReason::ZeroDrawdown,
            MetricsError::DegenerateVolatility => UndefinedReason::ZeroVolatility,
            MetricsError::DegenerateDownside => UndefinedReason::NoDownside,
            MetricsError::SeriesMismatch { .. } => UndefinedReason::SeriesMismatch,
            MetricsError::NoRoundTrips => UndefinedReason::NoRoundTrips,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndefinedReason {
    SeriesTooShort,
    ZeroDrawdown,
    ZeroVolatility,
    NoDownside,
    SeriesMismatch,
    NoRoundTrips,
}

/// Risk-free rate and minimum acceptable return, both per day.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConventions {
    pub risk_free_daily: f64,
    pub mar_daily: f64,
}

fn require_len(series: &[f64], needed: usize) -> Result<(), MetricsError> {
    if series.len() < needed {
        return Err(MetricsError::SeriesTooShort {
            needed,
            got: series.len(),
        });
    }
    Ok(())
}

pub fn total_return(equity: &[f64]) -> Result<f64, MetricsError> {
    require_len(equity, 2)?;
    Ok(equity[equity.len() - 1] / equity[0] - 1.0)
}

/// Compounds `total_return` earned over `n_days` return periods to a
/// 252-day year.
pub fn annualized_return(total_return: f64, n_days: usize) -> f64 {
    assert!(n_days >= 1, "annualization needs at least one period");
    (1.0 + total_return).powf(TRADING_DAYS_PER_YEAR / n_days as f64) - 1.0
}

pub fn daily_returns(equity: &[f64]) -> Vec<f64> {
    equity.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drawdown {
    pub max_drawdown: f64,
    pub calmar: Result<f64, MetricsError>,
}

/// Largest peak-to-trough decline (as a fraction of the peak) and the
/// Calmar ratio built on it.
pub fn drawdown_and_calmar(equity: &[f64]) -> Result<Drawdown, MetricsError> {
    require_len(equity, 2)?;
    let mut peak = equity[0];
    let mut mdd: f64 = 0.0;
    for &e in equity {
        peak = peak.max(e);
        mdd = mdd.max((peak - e) / peak);
    }
    let calmar = if mdd > 0.0 {
        let ar = annualized_return(total_return(equity)?, equity.len() - 1);
        Ok(ar / mdd)
    } else {
        Err(MetricsError::DegenerateDenominator)
    };
    Ok(Drawdown {
        max_drawdown: mdd,
        calmar,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskRatios {
    pub sharpe: Result<f64, MetricsError>,
    pub sortino: Result<f64, MetricsError>,
    pub volatility: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Annualized Sharpe, Sortino and volatility of daily returns.
///
/// The Sortino denominator is the downside deviation
/// `sqrt(sum(min(r - mar, 0)^2) / (n - 1))` over all observations.
pub fn sharpe_sortino_vol(returns: &[f64], risk_free_daily: f64, mar_daily: f64) -> Result<RiskRatios, MetricsError> {
    require_len(returns, 2)?;
    let n = returns.len() as f64;
    let m = mean(returns);
    let sd = (returns.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let annual = TRADING_DAYS_PER_YEAR.sqrt();

    let degenerate = sd <= 1e-14 * (1.0 + m.abs());
    let sharpe = if degenerate {
        Err(MetricsError::DegenerateVolatility)
    } else {
        Ok((m - risk_free_daily) / sd * annual)
    };
    let below = returns.iter().filter(|r| **r < mar_daily).count();
    let sortino = if below == 0 {
        Err(MetricsError::DegenerateDownside)
    } else {
        let dd = (returns
            .iter()
            .map(|r| (r - mar_daily).min(0.0).powi(2))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt();
        Ok((m - mar_daily) / dd * annual)
    };
    Ok(RiskRatios {
        sharpe,
        sortino,
        volatility: if degenerate { 0.0 } else { sd * annual },
    })
}

/// Annualized return of the portfolio minus that of the benchmark, both
/// over the same `n_days` return periods.
pub fn alpha(portfolio_equity: &[f64], benchmark_equity: &[f64], n_days: usize) -> Result<f64, MetricsError> {
    if portfolio_equity.len() != benchmark_equity.len() {
        return Err(MetricsError::SeriesMismatch {
            left: portfolio_equity.len(),
            right: benchmark_equity.len(),
        });
    }
    let p = annualized_return(total_return(portfolio_equity)?, n_days);
    let b = annualized_return(total_return(benchmark_equity)?, n_days);
    Ok(p - b)
}

/// Share of round trips closed at a profit.
pub fn win_rate(round_trips: &[RoundTrip]) -> Result<f64, MetricsError> {
    if round_trips.is_empty() {
        return Err(MetricsError::NoRoundTrips);
    }
    let wins = round_trips.iter().filter(|t| t.realized_pnl > 0.0).count();
    Ok(wins as f64 / round_trips.len() as f64)
}

/// Buy-and-hold equity of the traded asset, scaled to `initial_cash`.
pub fn buy_and_hold(closes: &[f64], initial_cash: f64) -> Vec<f64> {
    match closes.first() {
        Some(&c0) => closes.iter().map(|c| initial_cash * c / c0).collect(),
        None => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total_return: Option<f64>,
    pub annualized_return: Option<f64>,
    pub alpha: Option<f64>,
    pub sharpe: Option<f64>,
    pub sortino: Option<f64>,
    pub volatility: Option<f64>,
    pub max_drawdown: Option<f64>,
    pub calmar: Option<f64>,
    pub win_rate: Option<f64>,
    pub n_round_trips: usize,
    /// Equity points in the curve (window length).
    pub n_trading_days: usize,
    /// Why each null metric is null.
    pub undefined: BTreeMap<String, UndefinedReason>,
}

pub const TABLE_COLUMNS: [&str; 6] = ["TR", "SR", "MDD", "Vol", "WR", "alpha"];

impl MetricsReport {
    /// TR, SR, MDD, Vol, WR, alpha; percentages except SR.
    pub fn table_row(&self) -> [Option<f64>; 6] {
        let pct = |v: Option<f64>| v.map(|x| x * 100.0);
        [
            pct(self.total_return),
            self.sharpe,
            pct(self.max_drawdown),
            pct(self.volatility),
            pct(self.win_rate),
            pct(self.alpha),
        ]
    }

    /// Looks a metric up by its short name (TR, AR, SR, Sortino, MDD, Vol,
    /// Calmar, WR, alpha).
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "TR" => self.total_return,
            "AR" => self.annualized_return,
            "SR" => self.sharpe,
            "Sortino" => self.sortino,
            "MDD" => self.max_drawdown,
            "Vol" => self.volatility,
            "Calmar" => self.calmar,
            "WR" => self.win_rate,
            "alpha" => self.alpha,
            _ => None,
        }
    }
}

fn record<T>(undefined: &mut BTreeMap<String, UndefinedReason>, name: &str, v: Result<T, MetricsError>) -> Option<T> {
    match v {
        Ok(x) => Some(x),
        Err(e) => {
            undefined.insert(name.to_string(), e.reason());
            None
        }
    }
}

/// Assembles every metric from an equity curve, its benchmark and the
/// round trips. Component failures become undefined fields.
pub fn compute_metrics(
    equity: &[f64],
    benchmark_equity: &[f64],
    round_trips: &[RoundTrip],
    conventions: &MetricConventions,
) -> MetricsReport {
    let mut undefined = BTreeMap::new();
    let n_days = equity.len().saturating_sub(1).max(1);
    let tr = record(&mut undefined, "total_return", total_return(equity));
    let ar = tr.map(|tr| annualized_return(tr, n_days));
    if ar.is_none() {
        undefined.insert("annualized_return".into(), UndefinedReason::SeriesTooShort);
    }
    let alpha = record(&mut undefined, "alpha", alpha(equity, benchmark_equity, n_days));
    let dd = record(&mut undefined, "max_drawdown", drawdown_and_calmar(equity));
    let calmar = match dd {
        Some(d) => record(&mut undefined, "calmar", d.calmar),
        None => {
            undefined.insert("calmar".into(), UndefinedReason::SeriesTooShort);
            None
        }
    };
    let returns = daily_returns(equity);
    let ratios = record(
        &mut undefined,
        "volatility",
        sharpe_sortino_vol(&returns, conventions.risk_free_daily, conventions.mar_daily),
    );
    let (sharpe, sortino) = match ratios {
        Some(r) => (
            record(&mut undefined, "sharpe", r.sharpe),
            record(&mut undefined, "sortino", r.sortino),
        ),
        None => {
            undefined.insert("sharpe".into(), UndefinedReason::SeriesTooShort);
            undefined.insert("sortino".into(), UndefinedReason::SeriesTooShort);
            (None, None)
        }
    };
    let wr = record(&mut undefined, "win_rate", win_rate(round_trips));
    MetricsReport {
        total_return: tr,
        annualized_return: ar,
        alpha,
        sharpe,
        sortino,
        volatility: ratios.map(|r| r.volatility),
        max_drawdown: dd.map(|d| d.max_drawdown),
        calmar,
        win_rate: wr,
        n_round_trips: round_trips.len(),
        n_trading_days: equity.len(),
        undefined,
    }
}

/// Metrics for an episode against buy-and-hold of its own asset.
pub fn compute_report(log: &EpisodeLog, benchmark_equity: &[f64], conventions: &MetricConventions) -> MetricsReport {
    compute_metrics(&log.equity_curve(), benchmark_equity, &log.round_trips, conventions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn total_return_cases() {
        assert!(close(total_return(&[1_000_000.0, 1_123_100.0]).unwrap(), 0.1231, 1e-12));
        assert_eq!(total_return(&[5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert_eq!(total_return(&[10.0, 5.0]).unwrap(), -0.5);
        assert!(matches!(total_return(&[1.0]), Err(MetricsError::SeriesTooShort { .. })));
    }

    #[test]
    fn annualization() {
        assert_eq!(annualized_return(0.0, 17), 0.0);
        let ar = annualized_return(0.1231, 84);
        assert!(close(ar, 1.1231f64.powi(3) - 1.0, 1e-12));
        assert!(close(ar, 0.416_626_239_391, 1e-9));
        assert!(close(annualized_return(0.07, 252), 0.07, 1e-15));
    }

    #[test]
    fn drawdown_fixtures() {
        let d = drawdown_and_calmar(&[100.0, 120.0, 90.0, 100.0]).unwrap();
        assert_eq!(d.max_drawdown, 0.25);
        let d = drawdown_and_calmar(&[100.0, 90.0, 120.0, 80.0]).unwrap();
        assert!(close(d.max_drawdown, 1.0 / 3.0, 1e-15));
        let ar = annualized_return(-0.2, 3);
        assert!(close(d.calmar.unwrap(), ar / (1.0 / 3.0), 1e-12));
        let d = drawdown_and_calmar(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(d.max_drawdown, 0.0);
        assert_eq!(d.calmar, Err(MetricsError::DegenerateDenominator));
    }

    #[test]
    fn sharpe_fixtures() {
        let r = sharpe_sortino_vol(&[0.01, -0.01, 0.01, -0.01], 0.0, 0.0).unwrap();
        assert!(r.sharpe.unwrap().abs() < 1e-15);
        let r = sharpe_sortino_vol(&[0.002; 5], 0.0, 0.0).unwrap();
        assert_eq!(r.sharpe, Err(MetricsError::DegenerateVolatility));
        assert_eq!(r.sortino, Err(MetricsError::DegenerateDownside));
    }

    #[test]
    fn sharpe_hand_arithmetic() {
        // Element-by-element: mean = 0.05/4 = 0.0125
        // deviations: -0.0025, 0.0075, -0.0225, 0.0175
        // squares sum: 6.25e-6 + 5.625e-5 + 5.0625e-4 + 3.0625e-4 = 8.75e-4
        // sample var = 8.75e-4 / 3; downside: only -0.01 -> 1e-4 / 3
        let returns = [0.01, 0.02, -0.01, 0.03];
        let r = sharpe_sortino_vol(&returns, 0.0, 0.0).unwrap();
        let sd = (8.75e-4f64 / 3.0).sqrt();
        let dd = (1e-4f64 / 3.0).sqrt();
        let k = 252f64.sqrt();
        assert!(close(r.sharpe.unwrap(), 0.0125 / sd * k, 1e-12));
        assert!(close(r.sortino.unwrap(), 0.0125 / dd * k, 1e-12));
        assert!(close(r.volatility, sd * k, 1e-12));
    }

    #[test]
    fn alpha_cases() {
        let p = [100.0, 101.0, 99.0, 102.0];
        assert_eq!(alpha(&p, &p, 3).unwrap(), 0.0);
        let flat = [100.0; 11];
        let bench: Vec<f64> = (0..11).map(|i| 100.0 - i as f64).collect();
        let a = alpha(&flat, &bench, 10).unwrap();
        assert!(a > 0.0);
        assert!(close(a, -annualized_return(-0.1, 10), 1e-12));
        assert!(matches!(alpha(&flat, &p, 3), Err(MetricsError::SeriesMismatch { .. })));
    }

    fn trips(pnls: &[f64]) -> Vec<RoundTrip> {
        let d = NaiveDate::from_ymd_opt(2025, 1, 1).unwrap();
        pnls.iter()
            .map(|&p| RoundTrip {
                entry_day: d,
                exit_day: d,
                realized_pnl: p,
            })
            .collect()
    }

    #[test]
    fn win_rate_cases() {
        assert!(close(win_rate(&trips(&[5.0, -3.0, 2.0])).unwrap(), 2.0 / 3.0, 1e-15));
        assert_eq!(win_rate(&[]), Err(MetricsError::NoRoundTrips));
        assert_eq!(win_rate(&trips(&[1.0, 2.0])).unwrap(), 1.0);
    }

    #[test]
    fn all_hold_report() {
        let equity = [1e6; 10];
        let closes: Vec<f64> = (0..10).map(|i| 50.0 - i as f64).collect();
        let bench = buy_and_hold(&closes, 1e6);
        let rep = compute_metrics(&equity, &bench, &[], &MetricConventions::default());
        assert_eq!(rep.total_return, Some(0.0));
        assert_eq!(rep.max_drawdown, Some(0.0));
        assert_eq!(rep.win_rate, None);
        assert_eq!(rep.undefined["win_rate"], UndefinedReason::NoRoundTrips);
        assert_eq!(rep.undefined["calmar"], UndefinedReason::ZeroDrawdown);
        let bench_ar = annualized_return(41.0 / 50.0 - 1.0, 9);
        assert!(close(rep.alpha.unwrap(), -bench_ar, 1e-12));
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"win_rate\":null"));
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rep);
    }

    fn series() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.5f64..2.0, 3..50)
    }

    proptest! {
        #[test]
        fn scale_invariance(eq in series(), k in 0.01f64..1000.0) {
            let bench: Vec<f64> = eq.iter().rev().cloned().collect();
            let conv = MetricConventions::default();
            let a = compute_metrics(&eq, &bench, &[], &conv);
            let scaled: Vec<f64> = eq.iter().map(|x| x * k).collect();
            let bench_scaled: Vec<f64> = bench.iter().map(|x| x * k).collect();
            let b = compute_metrics(&scaled, &bench_scaled, &[], &conv);
            for name in ["TR", "AR", "MDD", "SR", "Sortino", "Vol", "Calmar", "alpha"] {
                match (a.get(name), b.get(name)) {
                    (Some(x), Some(y)) => prop_assert!(close(x, y, 1e-12), "{name}: {x} vs {y}"),
                    (x, y) => prop_assert_eq!(x.is_none(), y.is_none()),
                }
            }
        }

        #[test]
        fn new_high_never_raises_mdd(eq in series(), bump in 0.0f64..1.0) {
            let before = drawdown_and_calmar(&eq).unwrap().max_drawdown;
            let peak = eq.iter().cloned().fold(f64::MIN, f64::max);
            let mut extended = eq.clone();
            extended.push(peak * (1.0 + bump));
            let after = drawdown_and_calmar(&extended).unwrap().max_drawdown;
            prop_assert!(after <= before);
        }

        #[test]
        fn mdd_in_unit_interval(eq in series()) {
            let d = drawdown_and_calmar(&eq).unwrap().max_drawdown;
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}
