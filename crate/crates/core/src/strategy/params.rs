use serde::{Deserialize, Serialize};

use super::StrategyError;

/// Tunable windows and thresholds for S1-S4. Defaults match the clause
/// library shipped in prompts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyParams {
    pub s1_lookback: usize,
    pub s1_plunge_threshold: f64,
    pub s2_breakout_lookback: usize,
    pub s3_vol_window: usize,
    pub s3_trailing_window: usize,
    pub s3_percentile: f64,
    pub s4_volume_window: usize,
    pub s4_volume_multiplier: f64,
    pub exit_holding_period: usize,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            s1_lookback: 3,
            s1_plunge_threshold: 0.05,
            s2_breakout_lookback: 3,
            s3_vol_window: 10,
            s3_trailing_window: 60,
            s3_percentile: 0.20,
            s4_volume_window: 20,
            s4_volume_multiplier: 1.5,
            exit_holding_period: 5,
        }
    }
}

impl StrategyParams {
    pub fn validate(&self) -> Result<(), StrategyError> {
        let window = |field: &'static str, v: usize, min: usize| {
            if v < min {
                Err(StrategyError::InvalidParams {
                    field,
                    reason: format!("must be >= {min}, got {v}"),
                })
            } else {
                Ok(())
            }
        };
        let positive = |field: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(StrategyError::InvalidParams {
                    field,
                    reason: format!("must be > 0, got {v}"),
                })
            }
        };
        window("s1_lookback", self.s1_lookback, 1)?;
        window("s2_breakout_lookback", self.s2_breakout_lookback, 1)?;
        // A sample deviation needs at least two returns.
        window("s3_vol_window", self.s3_vol_window, 2)?;
        window("s3_trailing_window", self.s3_trailing_window, 1)?;
        window("s4_volume_window", self.s4_volume_window, 1)?;
        window("exit_holding_period", self.exit_holding_period, 1)?;
        positive("s1_plunge_threshold", self.s1_plunge_threshold)?;
        positive("s4_volume_multiplier", self.s4_volume_multiplier)?;
        if !(self.s3_percentile > 0.0 && self.s3_percentile < 1.0) {
            return Err(StrategyError::InvalidParams {
                field: "s3_percentile",
                reason: format!("must be in (0, 1), got {}", self.s3_percentile),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        StrategyParams::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let p = StrategyParams {
            s3_percentile: 1.0,
            ..Default::default()
        };
        assert!(matches!(p.validate(), Err(StrategyError::InvalidParams { field: "s3_percentile", .. })));
        let p = StrategyParams {
            s1_lookback: 0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = StrategyParams {
            s4_volume_multiplier: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
