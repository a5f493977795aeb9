use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ClauseRef, Leg, StrategyError, StrategyId, StrategyParams};
use crate::market_data::MarketState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Buy,
    Sell,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySignal {
    pub strategy_id: StrategyId,
    pub direction: Direction,
    pub triggered_clause: Option<ClauseRef>,
    pub evidence: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub insufficient_history: bool,
}

impl StrategySignal {
    fn quiet(strategy_id: StrategyId, evidence: BTreeMap<String, f64>) -> Self {
        Self {
            strategy_id,
            direction: Direction::None,
            triggered_clause: None,
            evidence,
            insufficient_history: false,
        }
    }

    fn fire(strategy_id: StrategyId, leg: Leg, evidence: BTreeMap<String, f64>) -> Self {
        let direction = match leg {
            Leg::Entry => Direction::Buy,
            Leg::Exit => Direction::Sell,
        };
        Self {
            strategy_id,
            direction,
            triggered_clause: Some(ClauseRef::new(strategy_id, leg)),
            evidence,
            insufficient_history: false,
        }
    }

    pub fn is_active(&self) -> bool {
        self.direction != Direction::None
    }
}

/// One signal per strategy, in S1..S4 order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSet(pub Vec<StrategySignal>);

impl SignalSet {
    pub fn get(&self, id: StrategyId) -> Option<&StrategySignal> {
        self.0.iter().find(|s| s.strategy_id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &StrategySignal> {
        self.0.iter()
    }

    /// True when `clause` is the clause that fired for its strategy.
    pub fn is_triggered(&self, clause: ClauseRef) -> bool {
        self.get(clause.strategy)
            .is_some_and(|s| s.triggered_clause == Some(clause))
    }
}

fn require(state: &MarketState, strategy: StrategyId, required: usize) -> Result<(), StrategyError> {
    let available = state.bars().len();
    if available < required {
        return Err(StrategyError::InsufficientHistory {
            strategy,
            required,
            available,
        });
    }
    Ok(())
}

/// Time-based exit shared by S1, S3 and S4.
fn holding_period_exit(
    state: &MarketState,
    params: &StrategyParams,
    evidence: &mut BTreeMap<String, f64>,
) -> bool {
    match state.days_held() {
        Some(days) => {
            evidence.insert("days_held".into(), days as f64);
            days >= params.exit_holding_period
        }
        None => false,
    }
}

/// S1, short-term reversal: buy after a plunge over the lookback.
pub fn signal_s1(state: &MarketState, params: &StrategyParams) -> Result<StrategySignal, StrategyError> {
    let id = StrategyId::S1;
    let n = params.s1_lookback;
    require(state, id, n + 1)?;
    let bars = state.bars();
    let last = bars.len() - 1;
    let ret = bars[last].close / bars[last - n].close - 1.0;

    let mut evidence = BTreeMap::new();
    evidence.insert("lookback_return".into(), ret);
    evidence.insert("plunge_threshold".into(), params.s1_plunge_threshold);
    if holding_period_exit(state, params, &mut evidence) {
        return Ok(StrategySignal::fire(id, Leg::Exit, evidence));
    }
    if ret <= -params.s1_plunge_threshold {
        return Ok(StrategySignal::fire(id, Leg::Entry, evidence));
    }
    Ok(StrategySignal::quiet(id, evidence))
}

/// S2, breakout momentum: close strictly above the prior N-day high; exit
/// on a close strictly below the prior N-day low while holding.
pub fn signal_s2(state: &MarketState, params: &StrategyParams) -> Result<StrategySignal, StrategyError> {
    let id = StrategyId::S2;
    let n = params.s2_breakout_lookback;
    require(state, id, n + 1)?;
    let bars = state.bars();
    let last = bars.len() - 1;
    let prior = &bars[last - n..last];
    let prior_high = prior.iter().map(|b| b.high).fold(f64::NEG_INFINITY, f64::max);
    let prior_low = prior.iter().map(|b| b.low).fold(f64::INFINITY, f64::min);
    let close = bars[last].close;

    let mut evidence = BTreeMap::new();
    evidence.insert("close".into(), close);
    evidence.insert("prior_high".into(), prior_high);
    evidence.insert("prior_low".into(), prior_low);
    if state.holding().shares > 0 && close < prior_low {
        return Ok(StrategySignal::fire(id, Leg::Exit, evidence));
    }
    if close > prior_high {
        return Ok(StrategySignal::fire(id, Leg::Entry, evidence));
    }
    Ok(StrategySignal::quiet(id, evidence))
}

fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (ss / (n - 1.0)).sqrt()
}

/// Linear-interpolation quantile (the R type-7 / numpy default).
fn quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// S3, volatility compression: current realized volatility sits at or below
/// the low percentile of its trailing distribution and the day closes up.
pub fn signal_s3(state: &MarketState, params: &StrategyParams) -> Result<StrategySignal, StrategyError> {
    let id = StrategyId::S3;
    let w = params.s3_vol_window;
    let trailing = params.s3_trailing_window;
    require(state, id, trailing + w)?;
    let bars = state.bars();
    let closes: Vec<f64> = bars[bars.len() - (trailing + w)..].iter().map(|b| b.close).collect();
    let log_returns: Vec<f64> = closes.windows(2).map(|p| (p[1] / p[0]).ln()).collect();
    // log_returns has trailing + w - 1 entries; each window of w ends on one
    // of the last `trailing` days.
    let vols: Vec<f64> = log_returns.windows(w).map(sample_std).collect();
    debug_assert_eq!(vols.len(), trailing);
    let current = *vols.last().unwrap();
    let threshold = quantile(&vols, params.s3_percentile);
    let up_tick = closes[closes.len() - 1] > closes[closes.len() - 2];

    let mut evidence = BTreeMap::new();
    evidence.insert("realized_vol".into(), current);
    evidence.insert("vol_threshold".into(), threshold);
    evidence.insert("up_tick".into(), if up_tick { 1.0 } else { 0.0 });
    if holding_period_exit(state, params, &mut evidence) {
        return Ok(StrategySignal::fire(id, Leg::Exit, evidence));
    }
    if current <= threshold && up_tick {
        return Ok(StrategySignal::fire(id, Leg::Entry, evidence));
    }
    Ok(StrategySignal::quiet(id, evidence))
}

/// S4, price-volume confirmation: an up close on volume strictly above a
/// multiple of the prior average.
pub fn signal_s4(state: &MarketState, params: &StrategyParams) -> Result<StrategySignal, StrategyError> {
    let id = StrategyId::S4;
    let w = params.s4_volume_window;
    require(state, id, w + 1)?;
    let bars = state.bars();
    let last = bars.len() - 1;
    let avg_volume = bars[last - w..last].iter().map(|b| b.volume as f64).sum::<f64>() / w as f64;
    let volume = bars[last].volume as f64;
    let up = bars[last].close > bars[last - 1].close;

    let mut evidence = BTreeMap::new();
    evidence.insert("volume".into(), volume);
    evidence.insert("avg_volume".into(), avg_volume);
    evidence.insert("price_change".into(), bars[last].close - bars[last - 1].close);
    if holding_period_exit(state, params, &mut evidence) {
        return Ok(StrategySignal::fire(id, Leg::Exit, evidence));
    }
    if up && volume > params.s4_volume_multiplier * avg_volume {
        return Ok(StrategySignal::fire(id, Leg::Entry, evidence));
    }
    Ok(StrategySignal::quiet(id, evidence))
}

/// Evaluates S1-S4. A strategy without enough history reports no signal and
/// carries the `insufficient_history` flag.
pub fn evaluate_all(state: &MarketState, params: &StrategyParams) -> SignalSet {
    type SignalFn = fn(&MarketState, &StrategyParams) -> Result<StrategySignal, StrategyError>;
    const FNS: [(StrategyId, SignalFn); 4] = [
        (StrategyId::S1, signal_s1),
        (StrategyId::S2, signal_s2),
        (StrategyId::S3, signal_s3),
        (StrategyId::S4, signal_s4),
    ];
    SignalSet(
        FNS.iter()
            .map(|(id, f)| match f(state, params) {
                Ok(signal) => signal,
                Err(StrategyError::InsufficientHistory { required, available, .. }) => {
                    let mut evidence = BTreeMap::new();
                    evidence.insert("required_bars".into(), required as f64);
                    evidence.insert("available_bars".into(), available as f64);
                    StrategySignal {
                        insufficient_history: true,
                        ..StrategySignal::quiet(*id, evidence)
                    }
                }
                Err(other) => unreachable!("signal functions only fail on history: {other}"),
            })
            .collect(),
    )
}
