use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::remote::{RateLimiter, RemoteAgent, RemoteSpec};
use super::{Action, AgentError, Decision, PromptBundle};
use crate::strategy::{Direction, SignalSet, StrategyId};

/// What an agent returned for one day, plus the raw text it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTurn {
    pub decision: Decision,
    /// Raw model outputs in attempt order; empty for offline agents.
    pub responses: Vec<String>,
    /// True when every response was unparseable and the hold fallback was used.
    pub fallback: bool,
}

impl AgentTurn {
    pub fn offline(decision: Decision) -> Self {
        Self {
            decision,
            responses: Vec::new(),
            fallback: false,
        }
    }
}

pub trait Agent: Send {
    fn id(&self) -> &str;

    fn decide(&mut self, prompt: &PromptBundle, signals: &SignalSet) -> Result<AgentTurn, AgentError>;
}

fn default_strategies() -> Vec<StrategyId> {
    StrategyId::ALL.to_vec()
}

/// Agent definition as written in the experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentSpec {
    /// Replays a fixed decision list; holds once the list runs out.
    Scripted { id: String, decisions: Vec<Decision> },
    /// Follows the reference strategies in priority order.
    RuleFollower {
        id: String,
        #[serde(default = "default_strategies")]
        strategies: Vec<StrategyId>,
    },
    Remote(RemoteSpec),
}

impl AgentSpec {
    pub fn id(&self) -> &str {
        match self {
            AgentSpec::Scripted { id, .. } | AgentSpec::RuleFollower { id, .. } => id,
            AgentSpec::Remote(spec) => &spec.id,
        }
    }

    pub fn is_offline(&self) -> bool {
        !matches!(self, AgentSpec::Remote(_))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.id().trim().is_empty() {
            return Err("agent id must not be empty".into());
        }
        match self {
            AgentSpec::RuleFollower { strategies, .. } if strategies.is_empty() => {
                Err("rule_follower needs at least one strategy".into())
            }
            AgentSpec::Remote(spec) => spec.validate(),
            _ => Ok(()),
        }
    }

    /// Instantiates a fresh agent for one episode.
    pub fn build(&self, limiter: Option<Arc<RateLimiter>>) -> Result<Box<dyn Agent>, AgentError> {
        Ok(match self {
            AgentSpec::Scripted { id, decisions } => Box::new(ScriptedAgent::new(id.clone(), decisions.clone())),
            AgentSpec::RuleFollower { id, strategies } => {
                Box::new(RuleFollower::new(id.clone(), strategies.clone()))
            }
            AgentSpec::Remote(spec) => Box::new(RemoteAgent::new(spec.clone(), limiter)?),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    id: String,
    script: VecDeque<Decision>,
}

impl ScriptedAgent {
    pub fn new(id: impl Into<String>, decisions: Vec<Decision>) -> Self {
        Self {
            id: id.into(),
            script: decisions.into(),
        }
    }
}

impl Agent for ScriptedAgent {
    fn id(&self) -> &str {
        &self.id
    }

    fn decide(&mut self, _prompt: &PromptBundle, _signals: &SignalSet) -> Result<AgentTurn, AgentError> {
        let decision = self
            .script
            .pop_front()
            .unwrap_or_else(|| Decision::hold("script exhausted"));
        Ok(AgentTurn::offline(decision))
    }
}

/// Oracle agent: acts on the first strategy (in priority order) whose
/// signal fired, citing exactly that clause. Quantity is left to the
/// execution defaults.
#[derive(Debug, Clone)]
pub struct RuleFollower {
    id: String,
    priority: Vec<StrategyId>,
}

impl RuleFollower {
    pub fn new(id: impl Into<String>, priority: Vec<StrategyId>) -> Self {
        Self {
            id: id.into(),
            priority,
        }
    }

    pub fn decide_on(&self, signals: &SignalSet) -> Decision {
        for strategy in &self.priority {
            let Some(signal) = signals.get(*strategy) else {
                continue;
            };
            let (Some(clause), action) = (
                signal.triggered_clause,
                match signal.direction {
                    Direction::Buy => Action::Buy,
                    Direction::Sell => Action::Sell,
                    Direction::None => continue,
                },
            ) else {
                continue;
            };
            let mut rationale = format!("{clause} triggered");
            let evidence: Vec<String> = signal.evidence.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
            if !evidence.is_empty() {
                let _ = write!(rationale, " ({})", evidence.join(", "));
            }
            return Decision {
                action,
                quantity: None,
                rationale,
                cited_clauses: vec![clause.to_string()],
            };
        }
        Decision::hold("no clause triggered")
    }
}

impl Agent for RuleFollower {
    fn id(&self) -> &str {
        &self.id
    }

    fn decide(&mut self, _prompt: &PromptBundle, signals: &SignalSet) -> Result<AgentTurn, AgentError> {
        Ok(AgentTurn::offline(self.decide_on(signals)))
    }
}

/// Returns recorded turns in order; used to replay persisted transcripts.
#[derive(Debug, Clone)]
pub struct TranscriptAgent {
    id: String,
    turns: VecDeque<AgentTurn>,
}

impl TranscriptAgent {
    pub fn new(id: impl Into<String>, turns: Vec<AgentTurn>) -> Self {
        Self {
            id: id.into(),
            turns: turns.into(),
        }
    }
}

impl Agent for TranscriptAgent {
    fn id(&self) -> &str {
        &self.id
    }

    fn decide(&mut self, _prompt: &PromptBundle, _signals: &SignalSet) -> Result<AgentTurn, AgentError> {
        self.turns.pop_front().ok_or(AgentError::TranscriptExhausted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::execution::HoldingState;
    use crate::strategy::{evaluate_all, StrategyParams};
    use crate::test_support::{bars_from, state_from_bars};

    fn prompt() -> PromptBundle {
        PromptBundle {
            mode: super::super::Mode::Strict,
            system_text: String::new(),
            user_text: String::new(),
        }
    }

    fn s2_day() -> SignalSet {
        let closes: Vec<f64> = (0..30).map(|i| 100.0 + i as f64 * 0.1).collect();
        let state = state_from_bars(bars_from(&closes, None, None, None), HoldingState::new(1e6));
        evaluate_all(&state, &StrategyParams::default())
    }

    fn quiet_day() -> SignalSet {
        let state = state_from_bars(bars_from(&[100.0; 30], None, None, None), HoldingState::new(1e6));
        evaluate_all(&state, &StrategyParams::default())
    }

    #[test]
    fn rule_follower_cites_triggered_clause() {
        let mut agent = RuleFollower::new("rf", vec![StrategyId::S2]);
        let turn = agent.decide(&prompt(), &s2_day()).unwrap();
        assert_eq!(turn.decision.action, Action::Buy);
        assert_eq!(turn.decision.quantity, None);
        assert_eq!(turn.decision.cited_clauses, vec!["S2.entry".to_string()]);
    }

    #[test]
    fn rule_follower_holds_without_signal() {
        let mut agent = RuleFollower::new("rf", vec![StrategyId::S2]);
        let turn = agent.decide(&prompt(), &quiet_day()).unwrap();
        assert_eq!(turn.decision.action, Action::Hold);
        assert!(turn.decision.cited_clauses.is_empty());
    }

    #[test]
    fn rule_follower_priority_first_match_wins() {
        let mut vols = vec![1000u64; 25];
        vols[24] = 5000;
        let mut closes = vec![100.0; 25];
        closes[24] = 104.0;
        let state = state_from_bars(bars_from(&closes, None, None, Some(&vols)), HoldingState::new(1e6));
        let signals = evaluate_all(&state, &StrategyParams::default());
        let a = RuleFollower::new("a", vec![StrategyId::S4, StrategyId::S2]).decide_on(&signals);
        assert_eq!(a.cited_clauses, vec!["S4.entry".to_string()]);
        let b = RuleFollower::new("b", vec![StrategyId::S2, StrategyId::S4]).decide_on(&signals);
        assert_eq!(b.cited_clauses, vec!["S2.entry".to_string()]);
    }

    #[test]
    fn scripted_runs_then_holds() {
        let buy = Decision {
            action: Action::Buy,
            quantity: Some(1),
            rationale: "b".into(),
            cited_clauses: vec![],
        };
        let mut agent = ScriptedAgent::new("s", vec![buy.clone()]);
        assert_eq!(agent.decide(&prompt(), &quiet_day()).unwrap().decision, buy);
        assert_eq!(agent.decide(&prompt(), &quiet_day()).unwrap().decision.action, Action::Hold);
    }

    #[test]
    fn spec_parses_from_toml() {
        #[derive(Deserialize)]
        struct Wrap {
            agents: Vec<AgentSpec>,
        }
        let w: Wrap = toml::from_str(
            r#"
            [[agents]]
            kind = "scripted"
            id = "s"
            decisions = [{ action = 1, rationale = "go" }, { action = 0, rationale = "wait" }]

            [[agents]]
            kind = "rule_follower"
            id = "rf"
            strategies = ["S2", "S1"]

            [[agents]]
            kind = "remote"
            id = "m"
            endpoint = "http://localhost:1/v1/chat/completions"
            model = "x"
            "#,
        )
        .unwrap();
        assert_eq!(w.agents.len(), 3);
        assert!(matches!(&w.agents[1], AgentSpec::RuleFollower { strategies, .. } if strategies == &[StrategyId::S2, StrategyId::S1]));
        match &w.agents[2] {
            AgentSpec::Remote(spec) => {
                assert_eq!(spec.temperature, 0.2);
                assert_eq!(spec.max_retries, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
