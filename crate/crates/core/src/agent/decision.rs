use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Trading action: -1 sell, 0 hold, 1 buy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Action {
    Sell,
    Hold,
    Buy,
}

impl TryFrom<i64> for Action {
    type Error = String;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            -1 => Ok(Action::Sell),
            0 => Ok(Action::Hold),
            1 => Ok(Action::Buy),
            other => Err(format!("action must be -1, 0 or 1, got {other}")),
        }
    }
}

impl From<Action> for i64 {
    fn from(a: Action) -> i64 {
        match a {
            Action::Sell => -1,
            Action::Hold => 0,
            Action::Buy => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantity: Option<u64>,
    pub rationale: String,
    #[serde(default)]
    pub cited_clauses: Vec<String>,
}

impl Decision {
    pub fn hold(rationale: impl Into<String>) -> Self {
        Self {
            action: Action::Hold,
            quantity: None,
            rationale: rationale.into(),
            cited_clauses: Vec::new(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecisionError {
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("invalid quantity: {0}")]
    InvalidQuantity(String),
}

/// Finds the first `{` at which a complete JSON object parses.
fn first_json_object(raw: &str) -> Option<serde_json::Map<String, Value>> {
    for (idx, _) in raw.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&raw[idx..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}

/// Extracts and validates a decision from free-form model output. Prose and
/// code fences around the JSON object are ignored.
pub fn parse_decision(raw: &str) -> Result<Decision, DecisionError> {
    let obj = first_json_object(raw)
        .ok_or_else(|| DecisionError::ParseError("no JSON object found".into()))?;

    let action = match obj.get("action") {
        None => return Err(DecisionError::InvalidAction("missing".into())),
        Some(v) => match v.as_i64() {
            Some(n) => Action::try_from(n).map_err(DecisionError::InvalidAction)?,
            None => return Err(DecisionError::InvalidAction(format!("{v} is not an integer"))),
        },
    };

    let quantity = match obj.get("quantity") {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_u64() {
            Some(q) => Some(q),
            None => {
                return Err(DecisionError::InvalidQuantity(format!(
                    "{v} is not a non-negative integer"
                )))
            }
        },
    };
    if action == Action::Hold && quantity.is_some_and(|q| q > 0) {
        return Err(DecisionError::InvalidQuantity("hold carries a non-zero quantity".into()));
    }

    let rationale = match obj.get("rationale") {
        Some(Value::String(s)) => s.clone(),
        Some(other) => return Err(DecisionError::ParseError(format!("rationale must be a string, got {other}"))),
        None => return Err(DecisionError::ParseError("missing rationale".into())),
    };

    let cited_clauses = match obj.get("cited_clauses") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|item| match item {
                Value::String(s) => Ok(s.clone()),
                other => Err(DecisionError::ParseError(format!("cited clause {other} is not a string"))),
            })
            .collect::<Result<_, _>>()?,
        Some(other) => {
            return Err(DecisionError::ParseError(format!(
                "cited_clauses must be an array, got {other}"
            )))
        }
    };

    Ok(Decision {
        action,
        quantity: if action == Action::Hold { None } else { quantity },
        rationale,
        cited_clauses,
    })
}

/// Byte-level entry point: invalid UTF-8 is replaced, never rejected.
pub fn parse_decision_bytes(raw: &[u8]) -> Result<Decision, DecisionError> {
    parse_decision(&String::from_utf8_lossy(raw))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_schema() {
        let d = parse_decision(
            r#"{"action":1,"quantity":100,"rationale":"S2 breakout","cited_clauses":["S2.entry"]}"#,
        )
        .unwrap();
        assert_eq!(d.action, Action::Buy);
        assert_eq!(d.quantity, Some(100));
        assert_eq!(d.cited_clauses, vec!["S2.entry".to_string()]);
    }

    #[test]
    fn action_out_of_range() {
        assert!(matches!(
            parse_decision(r#"{"action":2,"rationale":"x"}"#),
            Err(DecisionError::InvalidAction(_))
        ));
        assert!(matches!(
            parse_decision(r#"{"action":"1","rationale":"x"}"#),
            Err(DecisionError::InvalidAction(_))
        ));
        assert!(matches!(
            parse_decision(r#"{"rationale":"x"}"#),
            Err(DecisionError::InvalidAction(_))
        ));
    }

    #[test]
    fn fenced_output_with_prose() {
        let raw = "thinking... ```json {\"action\":0,\"rationale\":\"hold\"} ``` done";
        let d = parse_decision(raw).unwrap();
        assert_eq!(d, Decision::hold("hold"));
    }

    #[test]
    fn skips_braces_that_are_not_json() {
        let raw = "set {a, b} then {\"action\":-1,\"rationale\":\"exit\"}";
        assert_eq!(parse_decision(raw).unwrap().action, Action::Sell);
    }

    #[test]
    fn quantity_validation() {
        assert!(matches!(
            parse_decision(r#"{"action":1,"quantity":-5,"rationale":"x"}"#),
            Err(DecisionError::InvalidQuantity(_))
        ));
        assert!(matches!(
            parse_decision(r#"{"action":1,"quantity":2.5,"rationale":"x"}"#),
            Err(DecisionError::InvalidQuantity(_))
        ));
        assert!(matches!(
            parse_decision(r#"{"action":0,"quantity":3,"rationale":"x"}"#),
            Err(DecisionError::InvalidQuantity(_))
        ));
        let d = parse_decision(r#"{"action":0,"quantity":0,"rationale":"x"}"#).unwrap();
        assert_eq!(d.quantity, None);
        let d = parse_decision(r#"{"action":1,"quantity":null,"rationale":"x"}"#).unwrap();
        assert_eq!(d.quantity, None);
    }

    #[test]
    fn no_object() {
        assert!(matches!(parse_decision("hold"), Err(DecisionError::ParseError(_))));
        assert!(matches!(parse_decision(""), Err(DecisionError::ParseError(_))));
        assert!(matches!(parse_decision("[1,2]"), Err(DecisionError::ParseError(_))));
        assert!(matches!(parse_decision("{\"action\":1"), Err(DecisionError::ParseError(_))));
    }

    #[test]
    fn serializes_action_as_integer() {
        let d = Decision {
            action: Action::Sell,
            quantity: Some(3),
            rationale: "r".into(),
            cited_clauses: vec![],
        };
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"action":-1,"quantity":3,"rationale":"r","cited_clauses":[]}"#);
        assert_eq!(serde_json::from_str::<Decision>(&s).unwrap(), d);
    }
}
