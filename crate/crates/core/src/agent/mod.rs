//! Decision contract, prompt scaffolding and agent implementations.

mod agents;
mod decision;
mod prompt;
mod remote;

pub use agents::{Agent, AgentSpec, AgentTurn, RuleFollower, ScriptedAgent, TranscriptAgent};
pub use decision::{parse_decision, parse_decision_bytes, Action, Decision, DecisionError};
pub use prompt::{build_prompt, Mode, PromptBundle, PromptOptions, DECISION_SCHEMA, GUIDED_MARKER, STRICT_MANDATE};
pub use remote::{RateLimiter, RemoteAgent, RemoteSpec, FALLBACK_RATIONALE};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("endpoint {endpoint} unavailable after {attempts} attempts: {last_error}")]
    EndpointUnavailable {
        endpoint: String,
        attempts: u32,
        last_error: String,
    },
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
    #[error("recorded transcript has no more decisions")]
    TranscriptExhausted,
}
