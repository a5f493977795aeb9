//! Chat-completions client for remotely hosted models.
//!
//! Request: `{model, messages: [{role: "system"}, {role: "user"}], temperature}`.
//! The reply text is read from `choices[0].message.content`.

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::agents::{Agent, AgentTurn};
use super::{parse_decision, AgentError, Decision, PromptBundle};
use crate::strategy::SignalSet;

pub const FALLBACK_RATIONALE: &str = "fallback: unparseable output";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteSpec {
    pub id: String,
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// Name of the environment variable holding the bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_backoff_ms")]
    pub retry_backoff_ms: u64,
}

fn default_temperature() -> f64 {
    0.2
}
fn default_max_retries() -> u32 {
    2
}
fn default_timeout_secs() -> u64 {
    60
}
fn default_backoff_ms() -> u64 {
    250
}

impl RemoteSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if self.endpoint.is_empty() {
            return Err("endpoint must not be empty".into());
        }
        if self.timeout_secs == 0 {
            return Err("timeout_secs must be > 0".into());
        }
        Ok(())
    }
}

/// Token bucket shared by every remote agent of an experiment.
#[derive(Debug)]
pub struct RateLimiter {
    per_second: f64,
    burst: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(per_second: f64, burst: u32) -> Self {
        let burst = f64::from(burst.max(1));
        Self {
            per_second,
            burst,
            state: Mutex::new((burst, Instant::now())),
        }
    }

    /// Blocks until a token is available.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut guard = self.state.lock().expect("rate limiter poisoned");
                let (tokens, last) = &mut *guard;
                let now = Instant::now();
                *tokens = (*tokens + now.duration_since(*last).as_secs_f64() * self.per_second).min(self.burst);
                *last = now;
                if *tokens >= 1.0 {
                    *tokens -= 1.0;
                    return;
                }
                (1.0 - *tokens) / self.per_second
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

pub struct RemoteAgent {
    spec: RemoteSpec,
    http: ureq::Agent,
    api_key: Option<String>,
    limiter: Option<Arc<RateLimiter>>,
}

enum Attempt {
    Transport(String),
    Unparseable(String),
}

impl RemoteAgent {
    pub fn new(spec: RemoteSpec, limiter: Option<Arc<RateLimiter>>) -> Result<Self, AgentError> {
        let api_key = match &spec.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| AgentError::MissingCredential(var.clone()))?),
            None => None,
        };
        let http: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(spec.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            spec,
            http,
            api_key,
            limiter,
        })
    }

    pub fn request_body(&self, prompt: &PromptBundle) -> Value {
        json!({
            "model": self.spec.model,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
            "temperature": self.spec.temperature,
        })
    }

    fn call(&self, body: &Value) -> Result<String, Attempt> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        let mut request = self.http.post(&self.spec.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .header("Content-Type", "application/json")
            .send(body.to_string().as_bytes())
            .map_err(|e| Attempt::Transport(e.to_string()))?;
        let status = response.status();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(Attempt::Transport(format!("HTTP {status}")));
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Attempt::Unparseable(format!("response is not JSON: {e}")))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Attempt::Unparseable("missing choices[0].message.content".into()))
    }
}

impl Agent for RemoteAgent {
    fn id(&self) -> &str {
        &self.spec.id
    }

    /// Up to `1 + max_retries` attempts. If at least one attempt reached the
    /// model but none parsed, the turn falls back to a hold; if every attempt
    /// failed at the transport level the endpoint is reported unavailable.
    fn decide(&mut self, prompt: &PromptBundle, _signals: &SignalSet) -> Result<AgentTurn, AgentError> {
        let body = self.request_body(prompt);
        let attempts = self.spec.max_retries + 1;
        let mut responses = Vec::new();
        let mut reached_model = false;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 && self.spec.retry_backoff_ms > 0 {
                let factor = 1u64 << (attempt - 1).min(6);
                std::thread::sleep(Duration::from_millis(self.spec.retry_backoff_ms * factor));
            }
            match self.call(&body) {
                Ok(content) => {
                    reached_model = true;
                    let parsed = parse_decision(&content);
                    responses.push(content);
                    match parsed {
                        Ok(decision) => {
                            return Ok(AgentTurn {
                                decision,
                                responses,
                                fallback: false,
                            })
                        }
                        Err(e) => last_error = e.to_string(),
                    }
                }
                Err(Attempt::Unparseable(reason)) => {
                    reached_model = true;
                    last_error = reason;
                }
                Err(Attempt::Transport(reason)) => last_error = reason,
            }
        }
        if reached_model {
            Ok(AgentTurn {
                decision: Decision::hold(FALLBACK_RATIONALE),
                responses,
                fallback: true,
            })
        } else {
            Err(AgentError::EndpointUnavailable {
                endpoint: self.spec.endpoint.clone(),
                attempts,
                last_error,
            })
        }
    }
}
