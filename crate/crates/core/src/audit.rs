//! Behavioral and compliance analytics over finished episodes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Action, Decision, Mode};
use crate::execution::EpisodeLog;
use crate::metrics::MetricsReport;
use crate::strategy::{ClauseLibrary, Direction, SignalSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error("no signals recorded for decision day {0}")]
    SignalCoverageGap(NaiveDate),
    #[error("alignment tax needs at least two modes, got {0}")]
    InsufficientModes(usize),
    #[error("trap flag needs a defined {0}")]
    UndefinedInputs(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationReason {
    MissingCitation,
    UnknownClause,
    ClauseNotTriggered,
    DirectionMismatch,
}

impl ViolationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationReason::MissingCitation => "missing citation",
            ViolationReason::UnknownClause => "unknown clause",
            ViolationReason::ClauseNotTriggered => "clause not triggered",
            ViolationReason::DirectionMismatch => "direction mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub day: NaiveDate,
    pub decision: Decision,
    pub reason: ViolationReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub n_decision_days: usize,
    /// Non-hold decisions.
    pub n_actions: usize,
    pub n_compliant_actions: usize,
    pub violations: Vec<Violation>,
    /// Null when the episode has no actions.
    pub compliance_rate: Option<f64>,
}

impl ComplianceReport {
    /// Human-readable listing, one line per violation.
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "decision days: {}, actions: {}, compliant: {}\n",
            self.n_decision_days, self.n_actions, self.n_compliant_actions
        );
        for v in &self.violations {
            let _ = writeln!(
                out,
                "{}  action={} cited=[{}]  {}",
                v.day,
                i64::from(v.decision.action),
                v.decision.cited_clauses.join(", "),
                v.reason.as_str()
            );
        }
        out
    }
}

/// The per-day signal sets recorded in an episode log.
pub fn signals_from_log(log: &EpisodeLog) -> BTreeMap<NaiveDate, SignalSet> {
    log.steps
        .iter()
        .map(|s| (s.decision_day, s.signals.clone()))
        .collect()
}

fn action_direction(action: Action) -> Direction {
    match action {
        Action::Buy => Direction::Buy,
        Action::Sell => Direction::Sell,
        Action::Hold => Direction::None,
    }
}

fn judge(decision: &Decision, signals: &SignalSet, clauses: &ClauseLibrary) -> Option<ViolationReason> {
    if decision.action == Action::Hold {
        return None;
    }
    if decision.cited_clauses.is_empty() {
        return Some(ViolationReason::MissingCitation);
    }
    let mut resolved = Vec::with_capacity(decision.cited_clauses.len());
    for id in &decision.cited_clauses {
        match clauses.get(id.trim()) {
            Some(c) => resolved.push(c),
            None => return Some(ViolationReason::UnknownClause),
        }
    }
    let wanted = action_direction(decision.action);
    let mut any_triggered = false;
    for clause in resolved {
        if signals.is_triggered(clause.id) {
            if clause.predicate.direction == wanted {
                return None;
            }
            any_triggered = true;
        }
    }
    Some(if any_triggered {
        ViolationReason::DirectionMismatch
    } else {
        ViolationReason::ClauseNotTriggered
    })
}

/// Checks every non-hold decision against the clauses it cites.
///
/// An action is compliant when it cites at least one clause, every cited
/// clause exists, and at least one cited clause fired that day in the
/// direction of the action.
pub fn compliance_check(
    log: &EpisodeLog,
    daily_signals: &BTreeMap<NaiveDate, SignalSet>,
    clauses: &ClauseLibrary,
) -> Result<ComplianceReport, AuditError> {
    let mut n_actions = 0;
    let mut violations = Vec::new();
    for step in &log.steps {
        let signals = daily_signals
            .get(&step.decision_day)
            .ok_or(AuditError::SignalCoverageGap(step.decision_day))?;
        if step.decision.action != Action::Hold {
            n_actions += 1;
        }
        if let Some(reason) = judge(&step.decision, signals, clauses) {
            violations.push(Violation {
                day: step.decision_day,
                decision: step.decision.clone(),
                reason,
            });
        }
    }
    let n_compliant_actions = n_actions - violations.len();
    Ok(ComplianceReport {
        n_decision_days: log.steps.len(),
        n_actions,
        n_compliant_actions,
        violations,
        compliance_rate: (n_actions > 0).then(|| n_compliant_actions as f64 / n_actions as f64),
    })
}

/// One decision day with an open position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionPoint {
    pub gain: bool,
    pub sold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispositionReport {
    pub gain_days: usize,
    pub gain_days_sold: usize,
    pub loss_days: usize,
    pub loss_days_sold: usize,
    pub pgr: Option<f64>,
    pub plr: Option<f64>,
    pub de_score: Option<f64>,
    /// Set when a proportion is undefined.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub undefined_reason: Option<String>,
}

/// Decision points of an episode: days that open with shares held, split
/// by whether the mark price sits above the average cost.
pub fn decision_points(log: &EpisodeLog) -> Vec<DecisionPoint> {
    log.steps
        .iter()
        .filter(|s| s.holding_before.shares > 0)
        .map(|s| {
            let h = &s.holding_before;
            let mark = h.mark_price.unwrap_or(s.decision_close);
            DecisionPoint {
                gain: h.avg_cost.is_some_and(|c| mark > c),
                sold: s.decision.action == Action::Sell,
            }
        })
        .collect()
}

/// Proportion of gains realized minus proportion of losses realized.
pub fn disposition_from_points(points: &[DecisionPoint]) -> DispositionReport {
    let count = |gain: bool, sold: bool| {
        points
            .iter()
            .filter(|p| p.gain == gain && (!sold || p.sold))
            .count()
    };
    let (gain_days, gain_days_sold) = (count(true, false), count(true, true));
    let (loss_days, loss_days_sold) = (count(false, false), count(false, true));
    let pgr = (gain_days > 0).then(|| gain_days_sold as f64 / gain_days as f64);
    let plr = (loss_days > 0).then(|| loss_days_sold as f64 / loss_days as f64);
    let undefined_reason = match (gain_days, loss_days) {
        (0, 0) => Some("no decision days with an open position".to_string()),
        (0, _) => Some("no gain days".to_string()),
        (_, 0) => Some("no loss days".to_string()),
        _ => None,
    };
    DispositionReport {
        gain_days,
        gain_days_sold,
        loss_days,
        loss_days_sold,
        pgr,
        plr,
        de_score: pgr.zip(plr).map(|(g, l)| g - l),
        undefined_reason,
    }
}

pub fn disposition_effect(log: &EpisodeLog) -> DispositionReport {
    disposition_from_points(&decision_points(log))
}

pub const TAX_METRICS: [&str; 5] = ["TR", "SR", "MDD", "WR", "alpha"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeDelta {
    pub metric: String,
    pub mode_a: Mode,
    pub mode_b: Mode,
    /// `value(mode_a) - value(mode_b)`; null when either side is undefined.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentTaxReport {
    pub reports: BTreeMap<Mode, MetricsReport>,
    pub deltas: Vec<ModeDelta>,
}

impl AlignmentTaxReport {
    pub fn delta(&self, metric: &str, mode_a: Mode, mode_b: Mode) -> Option<f64> {
        self.deltas
            .iter()
            .find(|d| d.metric == metric && d.mode_a == mode_a && d.mode_b == mode_b)
            .and_then(|d| d.delta)
    }
}

/// All ordered pairwise deltas of TR, SR, MDD, WR and alpha across modes.
pub fn alignment_tax(reports: &BTreeMap<Mode, MetricsReport>) -> Result<AlignmentTaxReport, AuditError> {
    if reports.len() < 2 {
        return Err(AuditError::InsufficientModes(reports.len()));
    }
    let mut deltas = Vec::new();
    for metric in TAX_METRICS {
        for (a, ra) in reports {
            for (b, rb) in reports {
                if a == b {
                    continue;
                }
                deltas.push(ModeDelta {
                    metric: metric.to_string(),
                    mode_a: *a,
                    mode_b: *b,
                    delta: ra.get(metric).zip(rb.get(metric)).map(|(x, y)| x - y),
                });
            }
        }
    }
    Ok(AlignmentTaxReport {
        reports: reports.clone(),
        deltas,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapThresholds {
    pub win_rate: f64,
    pub alpha: f64,
}

impl Default for TrapThresholds {
    fn default() -> Self {
        Self {
            win_rate: 0.5,
            alpha: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapFlag {
    pub flagged: bool,
    pub diagnostic: String,
}

/// Flags a high win rate paired with non-positive alpha.
pub fn win_rate_trap_flag(report: &MetricsReport, thresholds: &TrapThresholds) -> Result<TrapFlag, AuditError> {
    let wr = report.win_rate.ok_or(AuditError::UndefinedInputs("win rate"))?;
    let alpha = report.alpha.ok_or(AuditError::UndefinedInputs("alpha"))?;
    let high_wr = wr >= thresholds.win_rate;
    let weak_alpha = alpha <= thresholds.alpha;
    let diagnostic = format!(
        "WR {:.2}% {} {:.2}%, alpha {:.2}% {} {:.2}%",
        wr * 100.0,
        if high_wr { ">=" } else { "<" },
        thresholds.win_rate * 100.0,
        alpha * 100.0,
        if weak_alpha { "<=" } else { ">" },
        thresholds.alpha * 100.0,
    );
    Ok(TrapFlag {
        flagged: high_wr && weak_alpha,
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::{render_clause_library, ClauseRef, Leg, StrategyId, StrategyParams, StrategySignal};

    fn report(tr: f64, sr: f64, mdd: f64, wr: Option<f64>, alpha: f64) -> MetricsReport {
        MetricsReport {
            total_return: Some(tr),
            annualized_return: None,
            alpha: Some(alpha),
            sharpe: Some(sr),
            sortino: None,
            volatility: None,
            max_drawdown: Some(mdd),
            calmar: None,
            win_rate: wr,
            n_round_trips: 0,
            n_trading_days: 0,
            undefined: BTreeMap::new(),
        }
    }

    fn signals_with(fired: Option<(StrategyId, Leg)>) -> SignalSet {
        SignalSet(
            StrategyId::ALL
                .iter()
                .map(|&id| {
                    let hit = fired.filter(|(s, _)| *s == id);
                    StrategySignal {
                        strategy_id: id,
                        direction: hit.map_or(Direction::None, |(_, leg)| leg.direction()),
                        triggered_clause: hit.map(|(s, leg)| ClauseRef::new(s, leg)),
                        evidence: BTreeMap::new(),
                        insufficient_history: false,
                    }
                })
                .collect(),
        )
    }

    fn buy(cited: &[&str]) -> Decision {
        Decision {
            action: Action::Buy,
            quantity: None,
            rationale: "r".into(),
            cited_clauses: cited.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn judge_rules() {
        let lib = render_clause_library(&StrategyParams::default());
        let s2 = signals_with(Some((StrategyId::S2, Leg::Entry)));
        let quiet = signals_with(None);
        assert_eq!(judge(&buy(&["S2.entry"]), &s2, &lib), None);
        assert_eq!(
            judge(&buy(&["S2.entry"]), &quiet, &lib),
            Some(ViolationReason::ClauseNotTriggered)
        );
        assert_eq!(judge(&buy(&[]), &s2, &lib), Some(ViolationReason::MissingCitation));
        assert_eq!(
            judge(&buy(&["S9.entry"]), &s2, &lib),
            Some(ViolationReason::UnknownClause)
        );
        let s2_exit = signals_with(Some((StrategyId::S2, Leg::Exit)));
        assert_eq!(
            judge(&buy(&["S2.exit"]), &s2_exit, &lib),
            Some(ViolationReason::DirectionMismatch)
        );
        assert_eq!(judge(&Decision::hold("wait"), &quiet, &lib), None);
        assert_eq!(judge(&buy(&["S1.entry", "S2.entry"]), &s2, &lib), None);
    }

    #[test]
    fn disposition_counting() {
        let mut pts = Vec::new();
        pts.extend([true, true, false, false].map(|sold| DecisionPoint { gain: true, sold }));
        pts.extend([true, false, false, false, false].map(|sold| DecisionPoint { gain: false, sold }));
        let r = disposition_from_points(&pts);
        assert_eq!(r.pgr, Some(0.5));
        assert_eq!(r.plr, Some(0.2));
        assert!((r.de_score.unwrap() - 0.3).abs() < 1e-15);
        assert!(r.undefined_reason.is_none());
    }

    #[test]
    fn disposition_extremes() {
        let pts: Vec<_> = (0..6)
            .map(|i| DecisionPoint {
                gain: i % 2 == 0,
                sold: i % 2 == 0,
            })
            .collect();
        let r = disposition_from_points(&pts);
        assert_eq!((r.pgr, r.plr, r.de_score), (Some(1.0), Some(0.0), Some(1.0)));
        let never: Vec<_> = pts.iter().map(|p| DecisionPoint { sold: false, ..*p }).collect();
        let r = disposition_from_points(&never);
        assert_eq!((r.pgr, r.plr, r.de_score), (Some(0.0), Some(0.0), Some(0.0)));
        let r = disposition_from_points(&[DecisionPoint { gain: true, sold: true }]);
        assert_eq!(r.de_score, None);
        assert_eq!(r.undefined_reason.as_deref(), Some("no loss days"));
    }

    #[test]
    fn alignment_tax_deltas() {
        let mut reports = BTreeMap::new();
        reports.insert(Mode::Guided, report(0.0, 0.0, 0.2083, None, 0.0));
        reports.insert(Mode::Strict, report(0.0, 0.0, 0.1166, None, 0.0));
        let tax = alignment_tax(&reports).unwrap();
        let d = tax.delta("MDD", Mode::Strict, Mode::Guided).unwrap() * 100.0;
        assert!((d - -9.17).abs() < 1e-9);
        assert_eq!(
            tax.delta("MDD", Mode::Strict, Mode::Guided),
            tax.delta("MDD", Mode::Guided, Mode::Strict).map(|x| -x)
        );
        assert!(tax.deltas.iter().filter(|d| d.metric == "WR").all(|d| d.delta.is_none()));
        assert_eq!(tax.deltas.len(), 5 * 2);

        reports.clear();
        reports.insert(Mode::Free, report(0.1168, 0.0, 0.0, None, 0.0));
        reports.insert(Mode::Strict, report(0.0910, 0.0, 0.0, None, 0.0));
        let tax = alignment_tax(&reports).unwrap();
        let d = tax.delta("TR", Mode::Strict, Mode::Free).unwrap() * 100.0;
        assert!((d - -2.58).abs() < 1e-9);
    }

    #[test]
    fn identical_reports_give_zero_deltas() {
        let r = report(0.05, 1.2, 0.1, Some(0.5), 0.02);
        let reports: BTreeMap<_, _> = Mode::ALL.iter().map(|m| (*m, r.clone())).collect();
        let tax = alignment_tax(&reports).unwrap();
        assert_eq!(tax.deltas.len(), 5 * 6);
        assert!(tax.deltas.iter().all(|d| d.delta == Some(0.0)));
        let one: BTreeMap<_, _> = reports.into_iter().take(1).collect();
        assert_eq!(alignment_tax(&one), Err(AuditError::InsufficientModes(1)));
    }

    #[test]
    fn trap_flag_cases() {
        let t = TrapThresholds::default();
        let flag = |wr, alpha| win_rate_trap_flag(&report(0.0, 0.0, 0.0, Some(wr), alpha), &t).unwrap().flagged;
        assert!(!flag(0.5, 0.0883));
        assert!(flag(0.6667, -0.02));
        assert!(!flag(0.2581, 0.0672));
        assert!(flag(0.5, 0.0));
        assert_eq!(
            win_rate_trap_flag(&report(0.0, 0.0, 0.0, None, 0.1), &t),
            Err(AuditError::UndefinedInputs("win rate"))
        );
    }
}
