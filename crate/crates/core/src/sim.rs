//! Fixed-step simulation of the true network and merging-unit sample streams.
//!
//! The network DAE is integrated with the trapezoidal rule at 80 samples
//! per cycle. Fault branches are inserted and removed at sample instants;
//! each distinct set of active faults gets its own factorized companion
//! matrix. Measurement noise is drawn sample-major from a seeded ChaCha
//! stream and CT attacks scale the noisy samples afterwards, so the noise
//! sequence never depends on the attack schedule.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{Complex, DMatrix, DVector, Dyn, LU};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{ChannelDef, ChannelKind, SampleFunction};
use crate::model::{make_fault_branch, NetworkModel, NodePhase};

pub const SAMPLES_PER_CYCLE: usize = 80;

/// Sample period for a given system frequency.
pub fn sample_period(frequency_hz: f64) -> f64 {
    1.0 / (frequency_hz * SAMPLES_PER_CYCLE as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum Event {
    /// Single line-to-ground fault through `resistance` (per-unit).
    SlgFault {
        start: f64,
        end: f64,
        node: NodePhase,
        resistance: f64,
    },
    /// CT ratio manipulation: samples of `channels` are multiplied by `factor`.
    CtAttack {
        start: f64,
        end: f64,
        channels: Vec<String>,
        factor: f64,
    },
}

impl Event {
    pub fn start(&self) -> f64 {
        match self {
            Event::SlgFault { start, .. } | Event::CtAttack { start, .. } => *start,
        }
    }

    pub fn end(&self) -> f64 {
        match self {
            Event::SlgFault { end, .. } | Event::CtAttack { end, .. } => *end,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Event::SlgFault { .. } => "SLG_FAULT",
            Event::CtAttack { .. } => "CT_ATTACK",
        }
    }

    /// Whether sample `k` falls inside the event.
    pub fn active_at(&self, k: usize, step: f64) -> bool {
        let (a, b) = sample_range(self.start(), self.end(), step);
        a <= k && k < b
    }
}

/// Half-open sample range `[start, end)` snapped to the nearest samples.
pub fn sample_range(start: f64, end: f64, step: f64) -> (usize, usize) {
    ((start / step).round() as usize, (end / step).round() as usize)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSchedule {
    pub events: Vec<Event>,
}

impl EventSchedule {
    pub fn new(events: Vec<Event>) -> Self {
        EventSchedule { events }
    }

    /// Check timing and targets against a network and its channels.
    pub fn validate(&self, network: &NetworkModel, channels: &[ChannelDef]) -> Result<()> {
        for (k, ev) in self.events.iter().enumerate() {
            let (s, e) = (ev.start(), ev.end());
            if !(s.is_finite() && e.is_finite() && s >= 0.0 && s < e) {
                return Err(Error::InvalidEvent(format!(
                    "event {k}: need 0 <= start < end, got [{s}, {e}]"
                )));
            }
            match ev {
                Event::SlgFault { node, resistance, .. } => {
                    if network.node_index(node).is_none() {
                        return Err(Error::InvalidEvent(format!("event {k}: unknown node {node}")));
                    }
                    if !(*resistance > 0.0) {
                        return Err(Error::InvalidEvent(format!(
                            "event {k}: fault resistance must be positive"
                        )));
                    }
                }
                Event::CtAttack {
                    channels: ids, factor, ..
                } => {
                    if ids.is_empty() {
                        return Err(Error::InvalidEvent(format!("event {k}: no target channels")));
                    }
                    if !(*factor > 0.0 && factor.is_finite()) {
                        return Err(Error::InvalidEvent(format!(
                            "event {k}: attack factor must be positive"
                        )));
                    }
                    for id in ids {
                        current_channel(channels, id).map_err(|e| match e {
                            Error::InvalidEvent(m) => Error::InvalidEvent(format!("event {k}: {m}")),
                            other => other,
                        })?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn current_channel(channels: &[ChannelDef], id: &str) -> Result<usize> {
    let k = channels
        .iter()
        .position(|c| c.id == id)
        .ok_or_else(|| Error::InvalidEvent(format!("unknown channel {id}")))?;
    if !channels[k].kind.is_current() {
        return Err(Error::InvalidEvent(format!("channel {id} is not a current channel")));
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// Periodic steady state of the discretized network.
    #[default]
    SteadyState,
    /// Inductor currents zero, algebraic states consistent with `t = 0`.
    DeEnergized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub duration: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub initial: InitialCondition,
}

/// Samples of one merging unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    pub merging_unit: String,
    pub channel_ids: Vec<String>,
    pub kinds: Vec<ChannelKind>,
    pub step: f64,
    /// `values[k][c]`: reported sample `k` of channel `c`.
    pub values: Vec<Vec<f64>>,
    /// Noise-free, attack-free copy of `values`.
    pub truth: Vec<Vec<f64>>,
}

impl SampleStream {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Multiply the targeted current channels by `factor` inside `[start, end)`.
pub fn apply_ct_attack(
    stream: &SampleStream,
    channels: &[&str],
    factor: f64,
    interval: (f64, f64),
) -> Result<SampleStream> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::InvalidEvent("attack factor must be positive".into()));
    }
    let span = stream.len() as f64 * stream.step;
    if !(interval.0 >= 0.0 && interval.0 < interval.1 && interval.1 <= span + stream.step / 2.0) {
        return Err(Error::InvalidEvent(format!(
            "attack interval [{}, {}] outside stream span {span}",
            interval.0, interval.1
        )));
    }
    let mut cols = Vec::new();
    for id in channels {
        let c = stream
            .channel_ids
            .iter()
            .position(|s| s == id)
            .ok_or_else(|| Error::InvalidEvent(format!("unknown channel {id}")))?;
        if !stream.kinds[c].is_current() {
            return Err(Error::InvalidEvent(format!("channel {id} is not a current channel")));
        }
        cols.push(c);
    }
    let mut out = stream.clone();
    let (a, b) = sample_range(interval.0, interval.1, stream.step);
    scale_samples(&mut out.values, &cols, factor, a, b);
    Ok(out)
}

fn scale_samples(values: &mut [Vec<f64>], cols: &[usize], factor: f64, a: usize, b: usize) {
    if factor == 1.0 {
        return;
    }
    for row in values.iter_mut().take(b).skip(a) {
        for &c in cols {
            row[c] *= factor;
        }
    }
}

/// Simulator output: every channel of every merging unit, in definition order.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub step: f64,
    pub times: Vec<f64>,
    pub channels: Vec<ChannelDef>,
    /// `measured[k][c]`: noisy, possibly attacked value.
    pub measured: Vec<Vec<f64>>,
    /// `clean[k][c]`: noise-free, attack-free value.
    pub clean: Vec<Vec<f64>>,
    /// True network state at each sample, in the unfaulted network layout.
    pub states: Vec<DVector<f64>>,
}

impl SimOutput {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn channel_index(&self, id: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.id == id)
    }

    /// Group the channels by merging unit, in order of first appearance.
    pub fn streams(&self) -> Vec<SampleStream> {
        let mut order: Vec<String> = Vec::new();
        for c in &self.channels {
            if !order.contains(&c.merging_unit) {
                order.push(c.merging_unit.clone());
            }
        }
        order
            .into_iter()
            .map(|mu| {
                let cols: Vec<usize> = (0..self.channels.len())
                    .filter(|c| self.channels[*c].merging_unit == mu)
                    .collect();
                let pick = |rows: &[Vec<f64>]| rows.iter().map(|r| cols.iter().map(|c| r[*c]).collect()).collect();
                SampleStream {
                    merging_unit: mu,
                    channel_ids: cols.iter().map(|c| self.channels[*c].id.clone()).collect(),
                    kinds: cols.iter().map(|c| self.channels[*c].kind).collect(),
                    step: self.step,
                    values: pick(&self.measured),
                    truth: pick(&self.clean),
                }
            })
            .collect()
    }

    /// Raw stream dump: `time_s, mu_id, channel_id, value_pu, truth_pu`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record(["time_s", "mu_id", "channel_id", "value_pu", "truth_pu"])?;
        for (k, t) in self.times.iter().enumerate() {
            for (c, ch) in self.channels.iter().enumerate() {
                w.write_record([
                    format!("{t:.9}"),
                    ch.merging_unit.clone(),
                    ch.id.clone(),
                    format!("{:.9}", self.measured[k][c]),
                    format!("{:.9}", self.clean[k][c]),
                ])?;
            }
        }
        w.flush()?;
        w.into_inner().map_err(|e| Error::Io(e.to_string()))?.flush()?;
        Ok(())
    }
}

/// Companion system of one topology: `A x_n = -(P x_{n-1} + B (u_n, u_{n-1}) + c)`.
struct Companion {
    net: NetworkModel,
    lu: LU<f64, Dyn, Dyn>,
    prev: DMatrix<f64>,
    u_now: DMatrix<f64>,
    u_prev: DMatrix<f64>,
    c: DVector<f64>,
}

impl Companion {
    fn new(net: NetworkModel, step: f64, at_step: usize) -> Result<Self> {
        if !net.is_linear() {
            return Err(Error::Config("the simulator supports linear networks only".into()));
        }
        let eq = net.equations();
        let (n, nu) = (net.state_count(), net.control_count());
        let mut a = eq.y_x.clone();
        let mut prev = DMatrix::zeros(n, n);
        let u_now = eq.y_u.clone();
        let mut u_prev = DMatrix::zeros(n, nu);
        let mut c = eq.c.clone();
        for r in (0..n).filter(|r| eq.is_differential(*r)) {
            for j in 0..n {
                a[(r, j)] = eq.y_x[(r, j)] + 2.0 * eq.d_x[(r, j)] / step;
                prev[(r, j)] = eq.y_x[(r, j)] - 2.0 * eq.d_x[(r, j)] / step;
            }
            u_prev.row_mut(r).copy_from(&eq.y_u.row(r));
            c[r] *= 2.0;
        }
        let lu = a.lu();
        check_pivots(lu.u().diagonal().as_slice(), at_step, step)?;
        Ok(Companion {
            net,
            lu,
            prev,
            u_now,
            u_prev,
            c,
        })
    }

    fn advance(&self, x_prev: &DVector<f64>, u_prev: &DVector<f64>, u_now: &DVector<f64>) -> DVector<f64> {
        let rhs = -(&self.prev * x_prev + &self.u_now * u_now + &self.u_prev * u_prev + &self.c);
        self.lu.solve(&rhs).expect("factorization checked at construction")
    }
}

fn check_pivots(diag: &[f64], at_step: usize, step: f64) -> Result<()> {
    let max = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if diag.iter().any(|v| !(v.abs() > max * 1e-13)) {
        return Err(Error::SingularCompanion {
            step: at_step,
            time_s: at_step as f64 * step,
        });
    }
    Ok(())
}

/// Periodic steady state of the trapezoidal recurrence at sample 0.
fn steady_state(net: &NetworkModel, step: f64) -> Result<DVector<f64>> {
    let eq = net.equations();
    let n = net.state_count();
    let w = 2.0 * std::f64::consts::PI * net.frequency_hz;
    // trapezoid maps jw to j(2/h)tan(wh/2); using it gives the exact discrete steady state
    let w_eff = 2.0 / step * (w * step / 2.0).tan();
    let mut a = DMatrix::<Complex<f64>>::zeros(n, n);
    for r in 0..n {
        for j in 0..n {
            a[(r, j)] = Complex::new(eq.y_x[(r, j)], w_eff * eq.d_x[(r, j)]);
        }
    }
    let phasors = net.control_phasors();
    let mut dc_u = DVector::zeros(net.control_count());
    let mut u = DVector::<Complex<f64>>::zeros(net.control_count());
    for dev in net.devices() {
        for sig in &dev.controls {
            if let crate::model::ControlSignal::Cosine { frequency_hz, .. } = sig {
                if (frequency_hz - net.frequency_hz).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "{}: source frequency differs from the system",
                        dev.name
                    )));
                }
            }
        }
    }
    let u0 = net.controls_at(0.0);
    for (k, (amp, ang)) in phasors.iter().enumerate() {
        if *amp == 0.0 {
            dc_u[k] = u0[k];
        } else {
            u[k] = Complex::from_polar(*amp, *ang);
        }
    }
    let yu = eq.y_u.map(|v| Complex::new(v, 0.0));
    let rhs = -(yu * u);
    let lu = a.lu();
    let x_ac = lu
        .solve(&rhs)
        .ok_or(Error::SingularCompanion { step: 0, time_s: 0.0 })?;
    let mut x = x_ac.map(|c| c.re);
    let dc_rhs = -(&eq.y_u * &dc_u + &eq.c);
    if dc_rhs.amax() > 0.0 {
        let x_dc = eq
            .y_x
            .clone()
            .lu()
            .solve(&dc_rhs)
            .ok_or(Error::SingularCompanion { step: 0, time_s: 0.0 })?;
        x += x_dc;
    }
    Ok(x)
}

/// Consistent start with every differential state at zero.
fn de_energized(net: &NetworkModel) -> Result<DVector<f64>> {
    let eq = net.equations();
    let n = net.state_count();
    let diff_states: Vec<usize> = (0..n).filter(|j| eq.d_x.column(*j).iter().any(|v| *v != 0.0)).collect();
    let alg_rows: Vec<usize> = (0..n).filter(|r| !eq.is_differential(*r)).collect();
    if alg_rows.len() + diff_states.len() != n {
        return Err(Error::ModelInvariant(
            "differential rows and differential states do not pair up".into(),
        ));
    }
    let u0 = net.controls_at(0.0);
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for (k, &r) in alg_rows.iter().enumerate() {
        a.row_mut(k).copy_from(&eq.y_x.row(r));
        b[k] = -(eq.y_u.row(r).transpose().dot(&u0) + eq.c[r]);
    }
    for (k, &j) in diff_states.iter().enumerate() {
        a[(alg_rows.len() + k, j)] = 1.0;
    }
    a.lu()
        .solve(&b)
        .ok_or(Error::SingularCompanion { step: 0, time_s: 0.0 })
}

/// Simulate the true network with scheduled events and emit every channel.
pub fn simulate(
    network: &NetworkModel,
    channels: &[ChannelDef],
    schedule: &EventSchedule,
    opts: SimOptions,
) -> Result<SimOutput> {
    if !(opts.duration > 0.0) {
        return Err(Error::Config("duration must be positive".into()));
    }
    if !(opts.noise_sigma >= 0.0) {
        return Err(Error::Config("noise sigma must be >= 0".into()));
    }
    schedule.validate(network, channels)?;
    let step = sample_period(network.frequency_hz);
    let samples = (opts.duration / step).round() as usize;
    let nx = network.state_count();
    let funcs: Vec<SampleFunction> = channels.iter().map(|c| c.compile(network)).collect::<Result<_>>()?;

    let faults: Vec<(usize, &Event)> = schedule
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| matches!(e, Event::SlgFault { .. }))
        .collect();
    let active_set = |k: usize| -> Vec<usize> {
        faults
            .iter()
            .filter(|(_, e)| e.active_at(k, step))
            .map(|(i, _)| *i)
            .collect()
    };
    let mut topologies: BTreeMap<Vec<usize>, Companion> = BTreeMap::new();
    let topology = |topologies: &mut BTreeMap<Vec<usize>, Companion>, set: &Vec<usize>, at: usize| -> Result<()> {
        if topologies.contains_key(set) {
            return Ok(());
        }
        let mut extra = Vec::new();
        for &i in set {
            if let Event::SlgFault { node, resistance, .. } = &schedule.events[i] {
                let zone = network
                    .zone_of_node(node)
                    .ok_or_else(|| Error::InvalidEvent(format!("fault node {node} is in no zone")))?;
                let dev = make_fault_branch(format!("fault{i}"), node.clone(), *resistance)?;
                extra.push((dev, network.zones()[zone].id.clone()));
            }
        }
        let net = if extra.is_empty() {
            network.clone()
        } else {
            network.with_extra_devices(extra)?
        };
        topologies.insert(set.clone(), Companion::new(net, step, at)?);
        Ok(())
    };

    let mut set = active_set(0);
    topology(&mut topologies, &set, 0)?;
    let first = &topologies[&set].net;
    let mut x = match opts.initial {
        InitialCondition::SteadyState => steady_state(first, step)?,
        InitialCondition::DeEnergized => de_energized(first)?,
    };

    let mut states = Vec::with_capacity(samples);
    let mut times = Vec::with_capacity(samples);
    let mut u_prev = network.controls_at(0.0);
    for k in 0..samples {
        let t = k as f64 * step;
        let u = network.controls_at(t);
        if k > 0 {
            let next = active_set(k);
            if next != set {
                topology(&mut topologies, &next, k)?;
                let n_new = topologies[&next].net.state_count();
                // base states keep their indices; fault currents restart from zero
                let mut moved = DVector::zeros(n_new);
                moved.rows_mut(0, nx).copy_from(&x.rows(0, nx));
                x = moved;
                set = next;
            }
            x = topologies[&set].advance(&x, &u_prev, &u);
        }
        states.push(x.rows(0, nx).into_owned());
        times.push(t);
        u_prev = u;
    }

    let clean: Vec<Vec<f64>> = states
        .iter()
        .map(|s| funcs.iter().map(|f| f.value(s)).collect())
        .collect();
    let mut measured = clean.clone();
    if opts.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let normal = Normal::new(0.0, opts.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
        for row in measured.iter_mut() {
            for v in row.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
    }
    for ev in &schedule.events {
        if let Event::CtAttack {
            start,
            end,
            channels: ids,
            factor,
        } = ev
        {
            let cols: Vec<usize> = ids
                .iter()
                .map(|id| current_channel(channels, id))
                .collect::<Result<_>>()?;
            let (a, b) = sample_range(*start, *end, step);
            scale_samples(&mut measured, &cols, *factor, a, b);
        }
    }

    Ok(SimOutput {
        step,
        times,
        channels: channels.to_vec(),
        measured,
        clean,
        states,
    })
}
