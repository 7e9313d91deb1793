//! Timed alert/trip decisions from the confidence trace.
//!
//! The accumulator holds `A(t) = sum (1 - c) dt` over the trailing reset
//! window. When `A` reaches `T_d` the prevailing (debounced) verdict is
//! turned into decisions and `A` restarts from zero. Within one anomaly
//! episode each decision kind is issued once; a later verdict change
//! (attack, then fault) issues the kinds not yet issued as soon as the area
//! is at or above `T_d` again.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{Diagnosis, Verdict};
use crate::sim::{Event, EventSchedule};

pub const DEFAULT_T_D: f64 = 0.040;
pub const DEFAULT_RESET_WINDOW: f64 = 0.100;
pub const DEFAULT_DEBOUNCE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecisionConfig {
    pub t_d: f64,
    pub reset_window: f64,
    /// Windows after a verdict change during which the new verdict is provisional.
    pub debounce: usize,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        DecisionConfig {
            t_d: DEFAULT_T_D,
            reset_window: DEFAULT_RESET_WINDOW,
            debounce: DEFAULT_DEBOUNCE,
        }
    }
}

impl DecisionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_d > 0.0 && self.t_d < self.reset_window) {
            return Err(Error::Config(format!(
                "need 0 < t_d < reset_window, got t_d={} reset_window={}",
                self.t_d, self.reset_window
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DecisionKind {
    Alert,
    Trip,
    /// Area crossed with no explaining hypothesis; logged only.
    Unresolved,
}

impl DecisionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionKind::Alert => "ALERT",
            DecisionKind::Trip => "TRIP",
            DecisionKind::Unresolved => "UNRESOLVED",
        }
    }

    /// Decisions mapped from a verdict.
    pub fn for_verdict(v: Verdict) -> Vec<DecisionKind> {
        match v {
            Verdict::Normal => vec![],
            Verdict::CyberAttack => vec![DecisionKind::Alert],
            Verdict::Fault => vec![DecisionKind::Trip],
            Verdict::Combined => vec![DecisionKind::Alert, DecisionKind::Trip],
            Verdict::Unresolved => vec![DecisionKind::Unresolved],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub kind: DecisionKind,
    pub time_s: f64,
    pub window: usize,
    pub verdict: Verdict,
    pub suspects: Vec<String>,
    pub zone: Option<String>,
    /// Window whose diagnosis set the prevailing verdict.
    pub cause_window: usize,
    /// Filled by [`latency_report`] once the schedule is known.
    pub latency_s: Option<f64>,
}

/// Trailing-window area under `1 - c`, in seconds.
#[derive(Debug, Clone)]
pub struct AreaAccumulator {
    reset_window: f64,
    entries: VecDeque<(f64, f64)>,
    area: f64,
}

impl AreaAccumulator {
    pub fn new(reset_window: f64) -> Self {
        AreaAccumulator {
            reset_window,
            entries: VecDeque::new(),
            area: 0.0,
        }
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    /// Add the contribution of the window ending at `t`.
    pub fn update(&mut self, t: f64, c: f64, dt: f64) -> f64 {
        let c = if c.is_finite() { c.clamp(0.0, 1.0) } else { 0.0 };
        self.entries.push_back((t, (1.0 - c) * dt));
        let horizon = t - self.reset_window * (1.0 - 1e-9);
        while self.entries.front().is_some_and(|(s, _)| *s <= horizon) {
            self.entries.pop_front();
        }
        self.area = self.entries.iter().map(|(_, a)| a).sum::<f64>().min(self.reset_window);
        self.area
    }

    pub fn reset(&mut self) {
        self.entries.clear();
        self.area = 0.0;
    }
}

/// Free-function form of [`AreaAccumulator::update`].
pub fn update_area(state: &mut AreaAccumulator, t: f64, c: f64, dt: f64) -> f64 {
    state.update(t, c, dt)
}

/// Sequential decision maker for one run.
#[derive(Debug, Clone)]
pub struct DecisionEngine {
    config: DecisionConfig,
    area: AreaAccumulator,
    current: Verdict,
    run_length: usize,
    prevailing: Verdict,
    prevailing_diag: Option<(usize, Diagnosis)>,
    issued: Vec<DecisionKind>,
    issued_for: Option<Verdict>,
}

impl DecisionEngine {
    pub fn new(config: DecisionConfig) -> Result<Self> {
        config.validate()?;
        Ok(DecisionEngine {
            config,
            area: AreaAccumulator::new(config.reset_window),
            current: Verdict::Normal,
            run_length: 0,
            prevailing: Verdict::Normal,
            prevailing_diag: None,
            issued: Vec::new(),
            issued_for: None,
        })
    }

    pub fn area(&self) -> f64 {
        self.area.area()
    }

    /// Verdict that has survived the debounce.
    pub fn prevailing(&self) -> Verdict {
        self.prevailing
    }

    /// Whether the latest verdict is still provisional.
    pub fn provisional(&self) -> bool {
        self.run_length <= self.config.debounce
    }

    /// Feed one window; returns the decisions issued at this window.
    pub fn step(&mut self, window: usize, c: f64, dt: f64, diag: &Diagnosis) -> Vec<Decision> {
        self.area.update(diag.time_s, c, dt);
        if diag.verdict == self.current {
            self.run_length += 1;
        } else {
            self.current = diag.verdict;
            self.run_length = 1;
        }
        if self.run_length > self.config.debounce {
            self.prevailing = self.current;
            self.prevailing_diag = Some((window, diag.clone()));
        }
        if self.prevailing == Verdict::Normal {
            self.issued.clear();
            self.issued_for = None;
            return Vec::new();
        }
        if self.area.area() < self.config.t_d || self.issued_for == Some(self.prevailing) {
            return Vec::new();
        }
        let (cause_window, cause) = match &self.prevailing_diag {
            Some((w, d)) => (*w, d),
            None => (window, diag),
        };
        let mut out = Vec::new();
        for kind in DecisionKind::for_verdict(self.prevailing) {
            if !self.issued.contains(&kind) {
                self.issued.push(kind);
                out.push(Decision {
                    kind,
                    time_s: diag.time_s,
                    window,
                    verdict: self.prevailing,
                    suspects: cause.suspects.clone(),
                    zone: cause.zone.clone(),
                    cause_window,
                    latency_s: None,
                });
            }
        }
        self.issued_for = Some(self.prevailing);
        if !out.is_empty() {
            self.area.reset();
        }
        out
    }
}

/// Per-event detection summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub event: usize,
    pub kind: String,
    pub start_s: f64,
    pub end_s: f64,
    pub expected: DecisionKind,
    pub decision_time_s: Option<f64>,
    pub latency_s: Option<f64>,
    pub missed: bool,
    pub mean_confidence: f64,
    pub min_confidence: f64,
}

fn expected_kind(ev: &Event) -> DecisionKind {
    match ev {
        Event::SlgFault { .. } => DecisionKind::Trip,
        Event::CtAttack { .. } => DecisionKind::Alert,
    }
}

/// Match decisions to events and fill in their latencies.
///
/// An event is matched by the first decision of its expected kind issued
/// between its start and its end plus one reset window. `trace` holds
/// `(time_s, confidence)` per window.
pub fn latency_report(
    decisions: &mut [Decision],
    schedule: &EventSchedule,
    trace: &[(f64, f64)],
    reset_window: f64,
) -> Vec<LatencyRow> {
    let mut rows = Vec::new();
    for (k, ev) in schedule.events.iter().enumerate() {
        let expected = expected_kind(ev);
        let (s, e) = (ev.start(), ev.end());
        let hit = decisions
            .iter_mut()
            .filter(|d| d.kind == expected && d.time_s >= s - 1e-12 && d.time_s <= e + reset_window)
            .min_by(|a, b| a.time_s.total_cmp(&b.time_s));
        let (time, latency) = match hit {
            Some(d) => {
                let lat = d.time_s - s;
                if d.latency_s.is_none_or(|l| lat < l) {
                    d.latency_s = Some(lat);
                }
                (Some(d.time_s), Some(lat))
            }
            None => (None, None),
        };
        let inside: Vec<f64> = trace
            .iter()
            .filter(|(t, _)| *t >= s && *t < e)
            .map(|(_, c)| *c)
            .collect();
        let mean = if inside.is_empty() {
            f64::NAN
        } else {
            inside.iter().sum::<f64>() / inside.len() as f64
        };
        let min = inside.iter().copied().fold(f64::INFINITY, f64::min);
        rows.push(LatencyRow {
            event: k,
            kind: ev.label().to_string(),
            start_s: s,
            end_s: e,
            expected,
            decision_time_s: time,
            latency_s: latency,
            missed: time.is_none(),
            mean_confidence: mean,
            min_confidence: if min.is_finite() { min } else { f64::NAN },
        });
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 1.0 / 4800.0;

    fn diag(t: f64, v: Verdict) -> Diagnosis {
        Diagnosis {
            time_s: t,
            verdict: v,
            suspects: vec![],
            zone: None,
            pre_confidence: 0.0,
            post_confidence: None,
            trail: vec![],
            zone_candidates: (None, None),
        }
    }

    #[test]
    fn constant_one_never_accumulates() {
        let mut a = AreaAccumulator::new(0.1);
        for k in 0..10_000 {
            assert_eq!(a.update(k as f64 * DT, 1.0, DT), 0.0);
        }
    }

    #[test]
    fn area_is_bounded_by_reset_window() {
        let mut a = AreaAccumulator::new(0.1);
        for k in 0..10_000 {
            let v = a.update(k as f64 * DT, 0.0, DT);
            assert!((0.0..=0.1).contains(&v));
        }
        assert!((a.area() - 0.1).abs() < DT);
    }

    fn crossing(c: f64) -> f64 {
        let mut eng = DecisionEngine::new(DecisionConfig::default()).unwrap();
        let t0 = 1.0;
        for k in 0..4800 {
            let t = t0 + k as f64 * DT;
            let d = eng.step(k, c, DT, &diag(t, Verdict::Fault));
            if !d.is_empty() {
                return t - t0;
            }
        }
        f64::NAN
    }

    #[test]
    fn crossing_times() {
        assert!((crossing(0.0) - 0.040).abs() <= DT);
        assert!((crossing(0.5) - 0.080).abs() <= DT);
    }

    #[test]
    fn alert_then_trip_on_verdict_change() {
        let mut eng = DecisionEngine::new(DecisionConfig::default()).unwrap();
        let mut out = Vec::new();
        for k in 0..2400 {
            let t = k as f64 * DT;
            let v = if t < 0.2 {
                Verdict::CyberAttack
            } else {
                Verdict::Combined
            };
            out.extend(eng.step(k, 0.0, DT, &diag(t, v)));
        }
        let kinds: Vec<_> = out.iter().map(|d| d.kind).collect();
        assert_eq!(kinds, [DecisionKind::Alert, DecisionKind::Trip]);
        assert!(out[0].time_s < out[1].time_s);
        // the trip follows the verdict change after the debounce, not another T_d
        assert!(out[1].time_s - 0.2 < 4.0 * DT);
    }

    #[test]
    fn recovered_before_crossing_means_no_decision() {
        let mut eng = DecisionEngine::new(DecisionConfig::default()).unwrap();
        for k in 0..4800 {
            let t = k as f64 * DT;
            let (c, v) = if t < 0.02 {
                (0.0, Verdict::CyberAttack)
            } else {
                (1.0, Verdict::Normal)
            };
            assert!(eng.step(k, c, DT, &diag(t, v)).is_empty());
        }
    }

    #[test]
    fn unresolved_is_logged() {
        let mut eng = DecisionEngine::new(DecisionConfig::default()).unwrap();
        let mut out = Vec::new();
        for k in 0..480 {
            out.extend(eng.step(k, 0.0, DT, &diag(k as f64 * DT, Verdict::Unresolved)));
        }
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].kind, DecisionKind::Unresolved);
    }

    #[test]
    fn latency_and_missed_rows() {
        let sched = EventSchedule::new(vec![
            Event::SlgFault {
                start: 1.0,
                end: 2.0,
                node: crate::model::NodePhase::new("b", crate::model::Phase::A),
                resistance: 0.01,
            },
            Event::CtAttack {
                start: 3.0,
                end: 4.0,
                channels: vec!["i".into()],
                factor: 3.0,
            },
        ]);
        let mut ds = vec![Decision {
            kind: DecisionKind::Trip,
            time_s: 1.04,
            window: 0,
            verdict: Verdict::Fault,
            suspects: vec![],
            zone: Some("z".into()),
            cause_window: 0,
            latency_s: None,
        }];
        let rows = latency_report(&mut ds, &sched, &[(1.5, 0.0), (3.5, 0.5)], 0.1);
        assert_eq!(rows.len(), 2);
        assert!((rows[0].latency_s.unwrap() - 0.04).abs() < 1e-12);
        assert!(!rows[0].missed);
        assert!(rows[1].missed);
        assert_eq!(rows[1].mean_confidence, 0.5);
        assert!((ds[0].latency_s.unwrap() - 0.04).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let bad = DecisionConfig {
            t_d: 0.2,
            ..DecisionConfig::default()
        };
        assert!(DecisionEngine::new(bad).is_err());
    }
}
