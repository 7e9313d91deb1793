//! End-to-end scenario runs: simulate, estimate, classify, decide, report.

pub mod builtin;
pub mod config;
pub mod report;

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DVector;

use crate::decision::{latency_report, Decision, DecisionEngine, DecisionKind};
use crate::error::{Error, Result};
use crate::hypothesis::{Classifier, Diagnosis, Verdict};
use crate::measurement::{build_measurement_model, MeasurementModel};
use crate::model::NetworkModel;
use crate::sim::{simulate, SimOptions, SimOutput};

pub use builtin::{case, list_cases, CaseInfo};
pub use config::{DeviceSpec, Expectations, NetworkConfig, ScenarioConfig};
pub use report::{RunReport, TimelineSegment, TraceRow};

pub const TRACE_FILE: &str = "trace.csv";
pub const DECISIONS_FILE: &str = "decisions.csv";
pub const REPORT_FILE: &str = "report.json";
pub const CONFIG_FILE: &str = "config.json";
pub const STREAMS_FILE: &str = "streams.csv";

/// Everything produced by one run.
pub struct RunOutput {
    pub config: ScenarioConfig,
    pub network: NetworkModel,
    pub model: MeasurementModel,
    pub sim: SimOutput,
    pub trace: Vec<TraceRow>,
    /// Diagnosis of every estimated window, aligned with `trace`.
    pub diagnoses: Vec<Diagnosis>,
    pub decisions: Vec<Decision>,
    pub report: RunReport,
}

/// Assemble the network, measurement model and sample streams of a config.
pub fn prepare(config: &ScenarioConfig) -> Result<(NetworkModel, MeasurementModel, SimOutput)> {
    config.validate()?;
    let network = config.network.build()?;
    let schedule = config.schedule();
    schedule.validate(&network, &config.channels)?;
    let sim = simulate(
        &network,
        &config.channels,
        &schedule,
        SimOptions {
            duration: config.duration,
            noise_sigma: config.noise_sigma,
            seed: config.seed,
            initial: config.initial,
        },
    )?;
    let model = build_measurement_model(&network, &config.channels, sim.step)?;
    Ok((network, model, sim))
}

/// Full measurement vector of the window ending at sample `k`.
pub fn window_measurements(
    model: &MeasurementModel,
    network: &NetworkModel,
    sim: &SimOutput,
    k: usize,
) -> Result<DVector<f64>> {
    model.measurement_vector(
        &sim.measured[k - 1],
        &sim.measured[k],
        &network.controls_at(sim.times[k - 1]),
        &network.controls_at(sim.times[k]),
    )
}

/// Run a scenario end to end (no files written).
pub fn run(config: &ScenarioConfig) -> Result<RunOutput> {
    let (network, model, sim) = prepare(config)?;
    let schedule = config.schedule();
    let mut classifier = Classifier::new(&model, &network, config.thresholds)?;
    let mut engine = DecisionEngine::new(config.decision)?;
    let dt = sim.step * config.stride as f64;

    let mut x = DVector::zeros(model.window_state_count());
    let mut trace = Vec::new();
    let mut diagnoses = Vec::new();
    let mut decisions = Vec::new();
    let mut window = 0;
    let mut k = 1;
    while k < sim.len() {
        let t = sim.times[k];
        let z = window_measurements(&model, &network, &sim, k)?;
        let (est, diag) = classifier.classify(&z, &x, t)?;
        if est.converged {
            x = est.x.clone();
        }
        let issued = engine.step(window, est.confidence, dt, &diag);
        let events: Vec<&str> = schedule
            .events
            .iter()
            .filter(|e| e.active_at(k, sim.step))
            .map(|e| e.label())
            .collect();
        trace.push(TraceRow {
            window,
            time_s: t,
            zeta: est.zeta,
            nu: est.nu,
            confidence: est.confidence,
            iterations: est.iterations,
            converged: est.converged,
            verdict: diag.verdict,
            provisional: engine.provisional(),
            post_confidence: diag.post_confidence,
            area: engine.area(),
            events: events.join("+"),
            alert: issued.iter().any(|d| d.kind == DecisionKind::Alert),
            trip: issued.iter().any(|d| d.kind == DecisionKind::Trip),
            unresolved: issued.iter().any(|d| d.kind == DecisionKind::Unresolved),
        });
        decisions.extend(issued);
        diagnoses.push(diag);
        window += 1;
        k += config.stride;
    }

    let conf: Vec<(f64, f64)> = trace.iter().map(|r| (r.time_s, r.confidence)).collect();
    let latency = latency_report(&mut decisions, &schedule, &conf, config.decision.reset_window);
    let report = build_report(config, &model, &sim, &trace, &diagnoses, &decisions, latency);
    Ok(RunOutput {
        config: config.clone(),
        network,
        model,
        sim,
        trace,
        diagnoses,
        decisions,
        report,
    })
}

fn timeline(trace: &[TraceRow], diagnoses: &[Diagnosis]) -> Vec<TimelineSegment> {
    let mut out: Vec<TimelineSegment> = Vec::new();
    for (r, d) in trace.iter().zip(diagnoses) {
        if let Some(last) = out.last_mut() {
            if last.verdict == d.verdict && last.zone == d.zone && last.suspects.first() == d.suspects.first() {
                last.last_window = r.window;
                last.end_s = r.time_s;
                for s in &d.suspects {
                    if !last.suspects.contains(s) {
                        last.suspects.push(s.clone());
                    }
                }
                continue;
            }
        }
        out.push(TimelineSegment {
            first_window: r.window,
            last_window: r.window,
            start_s: r.time_s,
            end_s: r.time_s,
            verdict: d.verdict,
            suspects: d.suspects.clone(),
            zone: d.zone.clone(),
        });
    }
    out
}

fn build_report(
    config: &ScenarioConfig,
    model: &MeasurementModel,
    sim: &SimOutput,
    trace: &[TraceRow],
    diagnoses: &[Diagnosis],
    decisions: &[Decision],
    latency: Vec<crate::decision::LatencyRow>,
) -> RunReport {
    let n = trace.len().max(1) as f64;
    let mean = trace.iter().map(|r| r.confidence).sum::<f64>() / n;
    let min = trace.iter().map(|r| r.confidence).fold(1.0, f64::min);
    let mut counts: BTreeMap<Verdict, usize> = BTreeMap::new();
    for d in diagnoses {
        *counts.entry(d.verdict).or_default() += 1;
    }
    let mut report = RunReport {
        name: config.name.clone(),
        samples: sim.len(),
        windows: trace.len(),
        sample_period_s: sim.step,
        measurement_rows: model.m(),
        window_states: model.n(),
        degrees_of_freedom: model.nu(),
        mean_confidence: mean,
        min_confidence: min,
        windows_below_threshold: trace.iter().filter(|r| r.confidence < config.thresholds.c_min).count(),
        verdict_counts: counts,
        timeline: timeline(trace, diagnoses),
        decisions: decisions.to_vec(),
        latency,
        expectations: Vec::new(),
    };
    if let Some(exp) = &config.expectations {
        let mut checks = Vec::new();
        for v in &exp.verdicts {
            checks.push(report::ExpectationResult {
                check: format!("verdict {v} present"),
                passed: report.verdict_counts.get(v).copied().unwrap_or(0) > 0,
            });
        }
        for k in &exp.decisions {
            checks.push(report::ExpectationResult {
                check: format!("decision {} issued", k.as_str()),
                passed: decisions.iter().any(|d| d.kind == *k),
            });
        }
        if exp.no_decisions {
            checks.push(report::ExpectationResult {
                check: "no decisions".into(),
                passed: decisions.is_empty(),
            });
        }
        if let Some(m) = exp.min_mean_confidence {
            checks.push(report::ExpectationResult {
                check: format!("mean confidence >= {m}"),
                passed: mean >= m,
            });
        }
        report.expectations = checks;
    }
    report
}

/// Write trace, decisions, report and the echoed config into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path, with_streams: bool) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    report::write_trace_csv(&dir.join(TRACE_FILE), &out.trace)?;
    report::write_decisions_csv(&dir.join(DECISIONS_FILE), &out.report.decisions)?;
    report::write_report_json(&dir.join(REPORT_FILE), &out.report)?;
    std::fs::write(dir.join(CONFIG_FILE), out.config.to_json() + "\n")?;
    if with_streams {
        out.sim.write_csv(&dir.join(STREAMS_FILE))?;
    }
    Ok(())
}

/// Map an error to the CLI exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidEvent(_)
        | Error::InvalidDevice(_)
        | Error::UnknownReference(_)
        | Error::DuplicateBinding(_)
        | Error::DanglingNode(_)
        | Error::ModelInvariant(_)
        | Error::Unobservable { .. } => 2,
        _ => 1,
    }
}
