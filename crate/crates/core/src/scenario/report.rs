//! Run report and CSV outputs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decision::{Decision, LatencyRow};
use crate::error::{Error, Result};
use crate::hypothesis::Verdict;

/// One estimation window of the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub window: usize,
    pub time_s: f64,
    pub zeta: f64,
    pub nu: usize,
    pub confidence: f64,
    pub iterations: usize,
    pub converged: bool,
    pub verdict: Verdict,
    pub provisional: bool,
    pub post_confidence: Option<f64>,
    pub area: f64,
    pub events: String,
    pub alert: bool,
    pub trip: bool,
    pub unresolved: bool,
}

pub const TRACE_COLUMNS: [&str; 15] = [
    "window",
    "time_s",
    "zeta",
    "nu",
    "confidence",
    "iterations",
    "converged",
    "verdict",
    "provisional",
    "post_confidence",
    "area_s",
    "events",
    "alert",
    "trip",
    "unresolved",
];

pub const DECISION_COLUMNS: [&str; 7] = [
    "time_s",
    "kind",
    "verdict",
    "latency_s",
    "suspects",
    "zone",
    "cause_window",
];

/// Run of consecutive windows with the same verdict, zone and lead suspect.
/// `suspects` is the union over the run, in order of first appearance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineSegment {
    pub first_window: usize,
    pub last_window: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub verdict: Verdict,
    pub suspects: Vec<String>,
    pub zone: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationResult {
    pub check: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub samples: usize,
    pub windows: usize,
    pub sample_period_s: f64,
    pub measurement_rows: usize,
    pub window_states: usize,
    pub degrees_of_freedom: usize,
    pub mean_confidence: f64,
    pub min_confidence: f64,
    pub windows_below_threshold: usize,
    pub verdict_counts: BTreeMap<Verdict, usize>,
    pub timeline: Vec<TimelineSegment>,
    pub decisions: Vec<Decision>,
    pub latency: Vec<LatencyRow>,
    pub expectations: Vec<ExpectationResult>,
}

impl RunReport {
    pub fn expectations_met(&self) -> bool {
        self.expectations.iter().all(|e| e.passed)
    }

    pub fn has_unresolved(&self) -> bool {
        self.verdict_counts.get(&Verdict::Unresolved).copied().unwrap_or(0) > 0
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{}: {} windows, mean confidence {:.4}, {} below threshold\n",
            self.name, self.windows, self.mean_confidence, self.windows_below_threshold
        );
        for seg in self.timeline.iter().filter(|s| s.verdict.is_anomaly()) {
            s.push_str(&format!(
                "  {:.4}-{:.4} s {} suspects=[{}] zone={}\n",
                seg.start_s,
                seg.end_s,
                seg.verdict,
                seg.suspects.join(" "),
                seg.zone.as_deref().unwrap_or("-")
            ));
            if s.len() > 4000 {
                s.push_str("  ...\n");
                break;
            }
        }
        for d in &self.decisions {
            s.push_str(&format!(
                "  decision {} at {:.6} s ({}), latency {}\n",
                d.kind.as_str(),
                d.time_s,
                d.verdict,
                d.latency_s.map(|l| format!("{:.6} s", l)).unwrap_or_else(|| "-".into())
            ));
        }
        for e in &self.expectations {
            s.push_str(&format!(
                "  expect {}: {}\n",
                e.check,
                if e.passed { "ok" } else { "FAILED" }
            ));
        }
        s
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(TRACE_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.window.to_string(),
            format!("{:.9}", r.time_s),
            format!("{:.6e}", r.zeta),
            r.nu.to_string(),
            format!("{:.9}", r.confidence),
            r.iterations.to_string(),
            flag(r.converged).to_string(),
            r.verdict.to_string(),
            flag(r.provisional).to_string(),
            r.post_confidence.map(|c| format!("{c:.9}")).unwrap_or_default(),
            format!("{:.9}", r.area),
            r.events.clone(),
            flag(r.alert).to_string(),
            flag(r.trip).to_string(),
            flag(r.unresolved).to_string(),
        ])?;
    }
    finish(w)
}

pub fn write_decisions_csv(path: &Path, decisions: &[Decision]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(DECISION_COLUMNS)?;
    for d in decisions {
        w.write_record([
            format!("{:.9}", d.time_s),
            d.kind.as_str().to_string(),
            d.verdict.to_string(),
            d.latency_s.map(|l| format!("{l:.9}")).unwrap_or_default(),
            d.suspects.join(";"),
            d.zone.clone().unwrap_or_default(),
            d.cause_window.to_string(),
        ])?;
    }
    finish(w)
}

fn finish(w: csv::Writer<BufWriter<File>>) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    inner.flush()?;
    Ok(())
}

pub fn write_report_json(path: &Path, report: &RunReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
