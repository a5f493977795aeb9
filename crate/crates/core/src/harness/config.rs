use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agent::{AgentSpec, Mode, PromptOptions};
use crate::audit::TrapThresholds;
use crate::execution::CostModel;
use crate::market_data::{MarketClock, WindowConfig};
use crate::metrics::MetricConventions;
use crate::strategy::StrategyParams;

/// One market: its data files, the tickers to trade and its window layout.
/// Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub name: String,
    pub bars: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub news: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fundamentals: Option<PathBuf>,
    pub tickers: Vec<String>,
    #[serde(default)]
    pub clock: MarketClock,
    #[serde(default)]
    pub windows: WindowConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateLimit {
    pub per_second: f64,
    pub burst: u32,
}

impl Default for RateLimit {
    fn default() -> Self {
        Self {
            per_second: 5.0,
            burst: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub markets: Vec<MarketConfig>,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub strategy_params: StrategyParams,
    #[serde(default)]
    pub cost_model: CostModel,
    #[serde(default = "default_initial_cash")]
    pub initial_cash: f64,
    #[serde(default)]
    pub metrics: MetricConventions,
    #[serde(default)]
    pub prompt: PromptOptions,
    #[serde(default)]
    pub audit: TrapThresholds,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub rate_limit: RateLimit,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Recorded for provenance. Every shipped agent is deterministic.
    #[serde(default)]
    pub seed: u64,
}

fn default_modes() -> Vec<Mode> {
    Mode::ALL.to_vec()
}
fn default_initial_cash() -> f64 {
    1_000_000.0
}
fn default_parallelism() -> usize {
    4
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> HarnessError {
    HarnessError::ConfigInvalid {
        path: path.into(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    /// Parses TOML text. Unknown keys and type errors carry the dotted path
    /// of the offending field.
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let de = toml::Deserializer::parse(text).map_err(|e| HarnessError::ConfigParse(e.to_string()))?;
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path == "." { String::new() } else { path }, e.into_inner().message().trim())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.initial_cash.is_finite() && self.initial_cash > 0.0) {
            return Err(invalid("initial_cash", format!("must be > 0, got {}", self.initial_cash)));
        }
        if self.markets.is_empty() {
            return Err(invalid("markets", "at least one market is required"));
        }
        if self.modes.is_empty() {
            return Err(invalid("modes", "at least one mode is required"));
        }
        if self.agents.is_empty() {
            return Err(invalid("agents", "at least one agent is required"));
        }
        if self.parallelism == 0 {
            return Err(invalid("parallelism", "must be >= 1"));
        }
        if !self.cost_model.is_valid() {
            return Err(invalid("cost_model.fee_rate", "must be a finite non-negative rate"));
        }
        if !(self.rate_limit.per_second.is_finite() && self.rate_limit.per_second > 0.0) {
            return Err(invalid("rate_limit.per_second", "must be > 0"));
        }
        self.strategy_params
            .validate()
            .map_err(|e| invalid("strategy_params", e.to_string()))?;
        let mut seen = BTreeSet::new();
        for (i, agent) in self.agents.iter().enumerate() {
            if !seen.insert(agent.id()) {
                return Err(invalid(format!("agents[{i}].id"), format!("duplicate agent id {:?}", agent.id())));
            }
            agent.validate().map_err(|r| invalid(format!("agents[{i}]"), r))?;
        }
        let mut names = BTreeSet::new();
        for (i, m) in self.markets.iter().enumerate() {
            if !names.insert(m.name.as_str()) {
                return Err(invalid(format!("markets[{i}].name"), format!("duplicate market {:?}", m.name)));
            }
            if m.tickers.is_empty() {
                return Err(invalid(format!("markets[{i}].tickers"), "at least one ticker is required"));
            }
            if m.windows.short_count + m.windows.long_count == 0 {
                return Err(invalid(format!("markets[{i}].windows"), "at least one window is required"));
            }
        }
        Ok(())
    }

    /// Resolves relative data and output paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for m in &mut self.markets {
            join(&mut m.bars);
            if let Some(p) = m.news.as_mut() {
                join(p);
            }
            if let Some(p) = m.fundamentals.as_mut() {
                join(p);
            }
        }
        join(&mut self.output_dir);
    }
}

/// Reads, validates and path-resolves an experiment config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::ConfigParse(format!("{}: {e}", path.display())))?;
    let mut config = ExperimentConfig::from_toml_str(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    config.resolve_paths(base);
    Ok(config)
}
