use std::fmt::Write as _;
use std::path::Path;

use super::run::{transcript_jsonl, AggregateRow, AlignmentEntry, CellFailure, ReportSet, RunReport};
use super::HarnessError;
use crate::audit::TAX_METRICS;
use crate::execution::{EpisodeLog, EpisodeRun};
use crate::metrics::buy_and_hold;

pub const AGGREGATE_HEADER: [&str; 9] = ["model", "strategy", "market", "TR", "SR", "MDD", "Vol", "WR", "alpha"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportFormats {
    pub json: bool,
    pub csv: bool,
    pub plots: bool,
}

impl Default for ReportFormats {
    fn default() -> Self {
        Self {
            json: true,
            csv: true,
            plots: true,
        }
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn pretty<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
    bytes.push(b'\n');
    bytes
}

pub(crate) fn write_run(out: &Path, report: &RunReport, run: &EpisodeRun) -> Result<(), HarnessError> {
    let dir = out.join("runs").join(&report.run_id);
    write(&dir.join("episode.json"), pretty(&run.log))?;
    write(&dir.join("transcript.jsonl"), transcript_jsonl(&run.transcript))?;
    write(&dir.join("report.json"), pretty(report))?;
    write(&dir.join("violations.txt"), report.compliance.render_text())?;
    write(&dir.join("equity.svg"), equity_svg(&run.log))
}

pub(crate) fn write_failure(out: &Path, failure: &CellFailure) -> Result<(), HarnessError> {
    write(&out.join("runs").join(&failure.run_id).join("failure.json"), pretty(failure))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

/// Aggregate rows as CSV in the fixed report column order. Percent columns are in
/// percent; undefined values are empty cells.
pub fn aggregate_csv(rows: &[AggregateRow], with_window_kind: bool) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = AGGREGATE_HEADER[..3].to_vec();
    if with_window_kind {
        header.push("window_kind");
    }
    header.extend_from_slice(&AGGREGATE_HEADER[3..]);
    w.write_record(&header).expect("in-memory write");
    for row in rows {
        let mut record = vec![row.agent.clone(), row.mode.to_string(), row.market.clone()];
        if with_window_kind {
            record.push(row.window_kind.map(|k| k.as_str().to_string()).unwrap_or_default());
        }
        record.extend(row.metrics.table_row().into_iter().map(cell));
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// Writes the report set and its derived tables and plots under `out`.
pub fn emit_reports(rs: &ReportSet, out: &Path, formats: &ReportFormats) -> Result<(), HarnessError> {
    if formats.json {
        write(&out.join("report_set.json"), pretty(rs))?;
    }
    if formats.csv {
        write(&out.join("aggregate.csv"), aggregate_csv(&rs.aggregates, false))?;
        write(
            &out.join("aggregate_by_window_kind.csv"),
            aggregate_csv(&rs.aggregates_by_window_kind, true),
        )?;
    }
    if formats.plots {
        for entry in rs.alignment_tax.iter().filter(|e| e.window_kind.is_none()) {
            let name = format!("alignment_{}_{}.svg", entry.agent, entry.market).replace(['/', '\\', ' '], "_");
            write(&out.join("plots").join(name), alignment_svg(entry))?;
        }
    }
    Ok(())
}

const W: f64 = 640.0;
const H: f64 = 320.0;
const PAD: f64 = 40.0;

fn polyline(values: &[f64], lo: f64, hi: f64, color: &str) -> String {
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = values.len().max(2) - 1;
    let points: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = PAD + (W - 2.0 * PAD) * i as f64 / n as f64;
            let y = H - PAD - (H - 2.0 * PAD) * (v - lo) / span;
            format!("{x:.1},{y:.1}")
        })
        .collect();
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        points.join(" ")
    )
}

/// Equity curve against buy-and-hold of the same asset.
pub fn equity_svg(log: &EpisodeLog) -> String {
    let equity = log.equity_curve();
    let bench = buy_and_hold(&log.closes(), log.initial_cash);
    let lo = equity.iter().chain(&bench).cloned().fold(f64::INFINITY, f64::min);
    let hi = equity.iter().chain(&bench).cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\">\n");
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let _ = writeln!(
        s,
        "<text x=\"{PAD}\" y=\"20\" font-size=\"12\">{} {} {} {}</text>",
        log.agent_id, log.mode, log.ticker, log.window.label
    );
    let _ = writeln!(s, "<text x=\"{PAD}\" y=\"{}\" font-size=\"10\">{hi:.0}</text>", PAD - 4.0);
    let _ = writeln!(s, "<text x=\"{PAD}\" y=\"{}\" font-size=\"10\">{lo:.0}</text>", H - PAD + 12.0);
    s.push_str(&polyline(&bench, lo, hi, "#999999"));
    s.push_str(&polyline(&equity, lo, hi, "#1f5fbf"));
    s.push_str("</svg>\n");
    s
}

/// Bars of each mode's delta against the first mode, per metric.
fn alignment_svg(entry: &AlignmentEntry) -> String {
    let modes: Vec<_> = entry.tax.reports.keys().copied().collect();
    let base = modes[0];
    let mut bars = Vec::new();
    for metric in TAX_METRICS {
        for &m in &modes[1..] {
            bars.push((format!("{metric} {m}-{base}"), entry.tax.delta(metric, m, base)));
        }
    }
    let max = bars
        .iter()
        .filter_map(|(_, d)| d.map(f64::abs))
        .fold(0.0, f64::max)
        .max(1e-12);
    let row_h = 18.0;
    let height = PAD + row_h * bars.len() as f64 + 10.0;
    let mid = W / 2.0 + 60.0;
    let half = W - mid - 20.0;
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{height}\">\n");
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let _ = writeln!(
        s,
        "<text x=\"10\" y=\"20\" font-size=\"12\">{} {} mode deltas</text>",
        entry.agent, entry.market
    );
    let _ = writeln!(
        s,
        "<line x1=\"{mid}\" y1=\"{PAD}\" x2=\"{mid}\" y2=\"{}\" stroke=\"black\"/>",
        height - 10.0
    );
    for (i, (label, delta)) in bars.iter().enumerate() {
        let y = PAD + row_h * i as f64;
        let _ = writeln!(s, "<text x=\"10\" y=\"{:.1}\" font-size=\"11\">{label}</text>", y + 12.0);
        if let Some(d) = delta {
            let len = half * d.abs() / max;
            let x = if *d >= 0.0 { mid } else { mid - len };
            let color = if *d >= 0.0 { "#2e8b57" } else { "#c0392b" };
            let _ = writeln!(
                s,
                "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{len:.1}\" height=\"{:.1}\" fill=\"{color}\"/>",
                y + 2.0,
                row_h - 4.0
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
