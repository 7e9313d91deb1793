//! Measurement model over a two-sample estimation window.
//!
//! The window state stacks the network state at the previous sample `t-h`
//! (slot 0) and at the current sample `t` (slot 1). Rows come in two groups:
//!
//! * metered channels (actual currents/voltages, derived neutral currents,
//!   power pseudo-measurements), one row per sample slot;
//! * virtual rows encoding the network equations: algebraic rows (KCL,
//!   source pins, resistive branches) once per slot, and one trapezoidal
//!   link per differential row tying the two slots together.
//!
//! Every row is `h_i(x) = Y_i x + x' F_i x + C_i`. Control inputs are known,
//! so they move to the measured side of virtual rows: the target of a
//! virtual row is `-(Y_u u + C)`, and is zero for KCL.
//!
//! Degrees of freedom are counted as `nu = m - n`, where `m` is the number of
//! enabled rows over both slots and `n` the number of window states still
//! referenced by an enabled row.

use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::LinearFactor;
use crate::model::{check_len, EquationRow, NetworkModel, NodePhase};

pub const SIGMA_ACTUAL: f64 = 0.002;
pub const SIGMA_DERIVED: f64 = 0.004;
pub const SIGMA_VIRTUAL: f64 = 1e-5;
pub const SIGMA_PSEUDO: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChannelKind {
    ActualCurrent,
    ActualVoltage,
    Virtual,
    Derived,
    PseudoPower,
}

impl ChannelKind {
    pub fn default_sigma(self) -> f64 {
        match self {
            ChannelKind::ActualCurrent | ChannelKind::ActualVoltage => SIGMA_ACTUAL,
            ChannelKind::Derived => SIGMA_DERIVED,
            ChannelKind::Virtual => SIGMA_VIRTUAL,
            ChannelKind::PseudoPower => SIGMA_PSEUDO,
        }
    }

    /// Channels fed by a current transformer.
    pub fn is_current(self) -> bool {
        matches!(self, ChannelKind::ActualCurrent | ChannelKind::Derived)
    }

    pub fn is_virtual(self) -> bool {
        self == ChannelKind::Virtual
    }
}

/// Quantity read by a metered channel at one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Node-phase voltage to ground.
    Voltage(NodePhase),
    /// First internal state (branch current) of a device.
    Current(String),
    /// Sum of branch currents, e.g. the neutral current of a three-phase feeder.
    CurrentSum(Vec<String>),
    /// Instantaneous power `v * i`.
    Power { node: NodePhase, device: String },
}

/// Definition of a metered channel of a merging unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDef {
    pub id: String,
    pub merging_unit: String,
    pub kind: ChannelKind,
    pub quantity: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl ChannelDef {
    pub fn new(id: impl Into<String>, mu: impl Into<String>, kind: ChannelKind, quantity: Quantity) -> Self {
        ChannelDef {
            id: id.into(),
            merging_unit: mu.into(),
            kind,
            quantity,
            sigma: None,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or_else(|| self.kind.default_sigma())
    }

    /// Resolve the quantity against the network state layout.
    pub fn compile(&self, network: &NetworkModel) -> Result<SampleFunction> {
        let current = |dev: &str| {
            network
                .internal_index(dev, 0)
                .ok_or_else(|| Error::UnknownReference(format!("channel {}: device {dev}", self.id)))
        };
        let voltage = |node: &NodePhase| {
            network
                .node_index(node)
                .ok_or_else(|| Error::UnknownReference(format!("channel {}: node {node}", self.id)))
        };
        let ok = matches!(
            (self.kind, &self.quantity),
            (ChannelKind::ActualCurrent, Quantity::Current(_))
                | (ChannelKind::ActualVoltage, Quantity::Voltage(_))
                | (ChannelKind::Derived, Quantity::CurrentSum(_))
                | (ChannelKind::PseudoPower, Quantity::Power { .. })
        );
        if !ok {
            return Err(Error::Config(format!(
                "channel {}: kind {:?} does not match its quantity",
                self.id, self.kind
            )));
        }
        if !(self.sigma() > 0.0) {
            return Err(Error::Config(format!("channel {}: sigma must be positive", self.id)));
        }
        Ok(match &self.quantity {
            Quantity::Voltage(n) => SampleFunction {
                linear: vec![(voltage(n)?, 1.0)],
                product: None,
            },
            Quantity::Current(d) => SampleFunction {
                linear: vec![(current(d)?, 1.0)],
                product: None,
            },
            Quantity::CurrentSum(ds) => {
                if ds.is_empty() {
                    return Err(Error::Config(format!("channel {}: empty current sum", self.id)));
                }
                SampleFunction {
                    linear: ds.iter().map(|d| current(d).map(|i| (i, 1.0))).collect::<Result<_>>()?,
                    product: None,
                }
            }
            Quantity::Power { node, device } => SampleFunction {
                linear: Vec::new(),
                product: Some((voltage(node)?, current(device)?)),
            },
        })
    }
}

/// A channel quantity as a function of one sample's network state.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFunction {
    pub linear: Vec<(usize, f64)>,
    pub product: Option<(usize, usize)>,
}

impl SampleFunction {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let mut v: f64 = self.linear.iter().map(|(i, a)| a * x[*i]).sum();
        if let Some((a, b)) = self.product {
            v += x[a] * x[b];
        }
        v
    }
}

/// One logical channel of the window model; owns one or more rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementChannel {
    pub id: String,
    pub merging_unit: Option<String>,
    pub kind: ChannelKind,
    pub sigma: f64,
    pub rows: Vec<usize>,
    /// Zone whose masking removes this channel.
    pub zone: Option<usize>,
}

#[derive(Debug)]
struct Layout {
    nx: usize,
    slots: usize,
    step: f64,
    channels: Vec<MeasurementChannel>,
    row_channel: Vec<usize>,
    y: DMatrix<f64>,
    c: DVector<f64>,
    quad: Vec<(usize, DMatrix<f64>)>,
    target_u_prev: DMatrix<f64>,
    target_u_now: DMatrix<f64>,
    target_c: DVector<f64>,
    target_quad_u: Vec<(usize, usize, DMatrix<f64>)>,
    /// Row ranges of metered channel definitions: (prev row, now row).
    def_rows: Vec<(usize, usize)>,
    defs: Vec<ChannelDef>,
    zone_ids: Vec<String>,
}

/// Immutable view of the window model with a channel/zone mask applied.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    layout: Arc<Layout>,
    masked_channels: BTreeSet<String>,
    masked_zones: BTreeSet<String>,
    enabled_rows: Vec<usize>,
    active_states: Vec<usize>,
    factor: OnceLock<Option<Arc<LinearFactor>>>,
}

/// Build the two-sample window model for `network` with sample step `step`.
pub fn build_measurement_model(network: &NetworkModel, defs: &[ChannelDef], step: f64) -> Result<MeasurementModel> {
    if !(step > 0.0) {
        return Err(Error::Config("sample step must be positive".into()));
    }
    let nx = network.state_count();
    let nu = network.control_count();
    let nw = 2 * nx;
    let eq = network.equations();

    let mut seen = BTreeSet::new();
    for d in defs {
        if !seen.insert(d.id.as_str()) {
            return Err(Error::DuplicateBinding(format!("channel id {} used twice", d.id)));
        }
        if d.kind.is_virtual() {
            return Err(Error::Config(format!(
                "channel {}: virtual rows are generated, not declared",
                d.id
            )));
        }
    }
    let compiled: Vec<SampleFunction> = defs.iter().map(|d| d.compile(network)).collect::<Result<_>>()?;

    let n_alg = (0..eq.rows.len()).filter(|r| !eq.is_differential(*r)).count();
    let n_dyn = eq.rows.len() - n_alg;
    let m = 2 * defs.len() + 2 * n_alg + n_dyn;

    let mut y = DMatrix::zeros(m, nw);
    let c = DVector::zeros(m);
    let mut quad = Vec::new();
    let mut target_u_prev = DMatrix::zeros(m, nu);
    let mut target_u_now = DMatrix::zeros(m, nu);
    let mut target_c = DVector::zeros(m);
    let mut target_quad_u = Vec::new();
    let mut channels = Vec::new();
    let mut row_channel = Vec::with_capacity(m);
    let mut def_rows = Vec::with_capacity(defs.len());

    let mut row = 0;
    for (d, f) in defs.iter().zip(&compiled) {
        let zone = network.zone_of_merging_unit(&d.merging_unit);
        let mut rows = Vec::new();
        for slot in 0..2 {
            let off = slot * nx;
            for (i, a) in &f.linear {
                y[(row, off + i)] += a;
            }
            if let Some((a, b)) = f.product {
                let mut fm = DMatrix::zeros(nw, nw);
                fm[(off + a, off + b)] += 0.5;
                fm[(off + b, off + a)] += 0.5;
                quad.push((row, fm));
            }
            rows.push(row);
            row_channel.push(channels.len());
            row += 1;
        }
        def_rows.push((rows[0], rows[1]));
        channels.push(MeasurementChannel {
            id: d.id.clone(),
            merging_unit: Some(d.merging_unit.clone()),
            kind: d.kind,
            sigma: d.sigma(),
            rows,
            zone,
        });
    }

    let row_zone = |r: usize| -> Option<usize> {
        match &eq.rows[r] {
            EquationRow::Internal { device, .. } => Some(network.device_zone(*device)),
            EquationRow::Kcl(node) => network
                .zone_of_node(node)
                .filter(|z| network.zone_interior_nodes(*z).contains(node)),
        }
    };
    let row_label = |r: usize| -> String {
        match &eq.rows[r] {
            EquationRow::Kcl(node) => format!("kcl:{node}"),
            EquationRow::Internal { device, index } => {
                format!("eq:{}#{index}", network.devices()[*device].name)
            }
        }
    };
    let quad_of = |r: usize| eq.quadratic.iter().find(|q| q.row == r);

    let mut push_virtual = |id: String, zone: Option<usize>, row: usize, channels: &mut Vec<MeasurementChannel>| {
        row_channel.push(channels.len());
        channels.push(MeasurementChannel {
            id,
            merging_unit: None,
            kind: ChannelKind::Virtual,
            sigma: SIGMA_VIRTUAL,
            rows: vec![row],
            zone,
        });
    };

    for slot in 0..2 {
        let off = slot * nx;
        for r in (0..eq.rows.len()).filter(|r| !eq.is_differential(*r)) {
            for j in 0..nx {
                y[(row, off + j)] = eq.y_x[(r, j)];
            }
            let tu = if slot == 0 {
                &mut target_u_prev
            } else {
                &mut target_u_now
            };
            for j in 0..nu {
                tu[(row, j)] = -eq.y_u[(r, j)];
            }
            target_c[row] = -eq.c[r];
            if let Some(q) = quad_of(r) {
                let mut fm = DMatrix::zeros(nw, nw);
                fm.view_mut((off, off), (nx, nx)).copy_from(&q.f_x);
                quad.push((row, fm));
                if q.f_u.iter().any(|v| *v != 0.0) {
                    target_quad_u.push((row, slot, -q.f_u.clone()));
                }
            }
            push_virtual(format!("{}@{slot}", row_label(r)), row_zone(r), row, &mut channels);
            row += 1;
        }
    }
    let h = step;
    for r in (0..eq.rows.len()).filter(|r| eq.is_differential(*r)) {
        for j in 0..nx {
            let yx = eq.y_x[(r, j)];
            let d = eq.d_x[(r, j)];
            y[(row, j)] = yx - 2.0 * d / h;
            y[(row, nx + j)] = yx + 2.0 * d / h;
        }
        for j in 0..nu {
            target_u_prev[(row, j)] = -eq.y_u[(r, j)];
            target_u_now[(row, j)] = -eq.y_u[(r, j)];
        }
        target_c[row] = -2.0 * eq.c[r];
        if let Some(q) = quad_of(r) {
            let mut fm = DMatrix::zeros(nw, nw);
            fm.view_mut((0, 0), (nx, nx)).copy_from(&q.f_x);
            fm.view_mut((nx, nx), (nx, nx)).copy_from(&q.f_x);
            quad.push((row, fm));
            if q.f_u.iter().any(|v| *v != 0.0) {
                target_quad_u.push((row, 0, -q.f_u.clone()));
                target_quad_u.push((row, 1, -q.f_u.clone()));
            }
        }
        push_virtual(
            format!("dyn:{}", row_label(r).trim_start_matches("eq:")),
            row_zone(r),
            row,
            &mut channels,
        );
        row += 1;
    }
    debug_assert_eq!(row, m);

    let layout = Layout {
        nx,
        slots: 2,
        step,
        channels,
        row_channel,
        y,
        c,
        quad,
        target_u_prev,
        target_u_now,
        target_c,
        target_quad_u,
        def_rows,
        defs: defs.to_vec(),
        zone_ids: network.zones().iter().map(|z| z.id.clone()).collect(),
    };
    MeasurementModel::from_mask(Arc::new(layout), BTreeSet::new(), BTreeSet::new())
}

/// One row of a hand-built measurement model.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub id: String,
    pub kind: ChannelKind,
    pub sigma: f64,
    pub y: Vec<f64>,
    pub c: f64,
    /// Optional symmetric quadratic term `x' F x`.
    pub f: Option<DMatrix<f64>>,
}

impl RawRow {
    pub fn linear(id: impl Into<String>, sigma: f64, y: Vec<f64>) -> Self {
        RawRow {
            id: id.into(),
            kind: ChannelKind::ActualVoltage,
            sigma,
            y,
            c: 0.0,
            f: None,
        }
    }
}

/// Build a single-slot model straight from rows, without a network.
///
/// Used for generic least-squares problems; `measurement_vector` is not
/// available on such models, callers supply `z` directly.
pub fn model_from_rows(states: usize, rows: Vec<RawRow>) -> Result<MeasurementModel> {
    let m = rows.len();
    let mut y = DMatrix::zeros(m, states);
    let mut c = DVector::zeros(m);
    let mut quad = Vec::new();
    let mut channels = Vec::with_capacity(m);
    let mut seen = BTreeSet::new();
    for (i, r) in rows.into_iter().enumerate() {
        check_len("row coefficients", states, r.y.len())?;
        if !(r.sigma > 0.0) {
            return Err(Error::Config(format!("row {}: sigma must be positive", r.id)));
        }
        if !seen.insert(r.id.clone()) {
            return Err(Error::DuplicateBinding(format!("row id {}", r.id)));
        }
        for (j, v) in r.y.iter().enumerate() {
            y[(i, j)] = *v;
        }
        c[i] = r.c;
        if let Some(f) = r.f {
            if f.nrows() != states || f.ncols() != states {
                return Err(Error::Dimension {
                    what: "quadratic row",
                    expected: states,
                    got: f.nrows(),
                });
            }
            quad.push((i, (&f + f.transpose()) * 0.5));
        }
        channels.push(MeasurementChannel {
            id: r.id,
            merging_unit: None,
            kind: r.kind,
            sigma: r.sigma,
            rows: vec![i],
            zone: None,
        });
    }
    let layout = Layout {
        nx: states,
        slots: 1,
        step: 0.0,
        channels,
        row_channel: (0..m).collect(),
        y,
        c,
        quad,
        target_u_prev: DMatrix::zeros(m, 0),
        target_u_now: DMatrix::zeros(m, 0),
        target_c: DVector::zeros(m),
        target_quad_u: Vec::new(),
        def_rows: Vec::new(),
        defs: Vec::new(),
        zone_ids: Vec::new(),
    };
    MeasurementModel::from_mask(Arc::new(layout), BTreeSet::new(), BTreeSet::new())
}

impl MeasurementModel {
    fn from_mask(
        layout: Arc<Layout>,
        masked_channels: BTreeSet<String>,
        masked_zones: BTreeSet<String>,
    ) -> Result<Self> {
        let zone_idx: BTreeSet<usize> = masked_zones
            .iter()
            .filter_map(|z| layout.zone_ids.iter().position(|id| id == z))
            .collect();
        let mut enabled_rows = Vec::new();
        for ch in &layout.channels {
            let off = masked_channels.contains(&ch.id) || ch.zone.is_some_and(|z| zone_idx.contains(&z));
            if !off {
                enabled_rows.extend(ch.rows.iter().copied());
            }
        }
        enabled_rows.sort_unstable();

        let nw = layout.slots * layout.nx;
        let mut active = vec![false; nw];
        for &r in &enabled_rows {
            for (j, a) in active.iter_mut().enumerate() {
                if layout.y[(r, j)] != 0.0 {
                    *a = true;
                }
            }
        }
        for (r, f) in &layout.quad {
            if enabled_rows.binary_search(r).is_ok() {
                for (j, a) in active.iter_mut().enumerate() {
                    if f.row(j).iter().any(|v| *v != 0.0) {
                        *a = true;
                    }
                }
            }
        }
        let active_states: Vec<usize> = (0..nw).filter(|j| active[*j]).collect();

        let model = MeasurementModel {
            layout,
            masked_channels,
            masked_zones,
            enabled_rows,
            active_states,
            factor: OnceLock::new(),
        };
        if model.m() < model.n() {
            return Err(Error::Unobservable {
                m: model.m(),
                n: model.n(),
                detail: "fewer enabled rows than estimated states".into(),
            });
        }
        if model.is_linear() && model.linear_factor().is_none() {
            return Err(Error::Unobservable {
                m: model.m(),
                n: model.n(),
                detail: "gain matrix is rank deficient".into(),
            });
        }
        Ok(model)
    }

    /// Network states per sample.
    pub fn sample_state_count(&self) -> usize {
        self.layout.nx
    }

    /// Length of the full window state vector (both slots).
    pub fn window_state_count(&self) -> usize {
        self.layout.slots * self.layout.nx
    }

    pub fn step(&self) -> f64 {
        self.layout.step
    }

    /// Enabled rows.
    pub fn m(&self) -> usize {
        self.enabled_rows.len()
    }

    /// Estimated (active) window states.
    pub fn n(&self) -> usize {
        self.active_states.len()
    }

    /// Degrees of freedom `m - n`.
    pub fn nu(&self) -> usize {
        self.m() - self.n()
    }

    pub fn total_rows(&self) -> usize {
        self.layout.row_channel.len()
    }

    pub fn enabled_rows(&self) -> &[usize] {
        &self.enabled_rows
    }

    pub fn active_states(&self) -> &[usize] {
        &self.active_states
    }

    pub fn is_linear(&self) -> bool {
        !self
            .layout
            .quad
            .iter()
            .any(|(r, _)| self.enabled_rows.binary_search(r).is_ok())
    }

    pub fn channels(&self) -> &[MeasurementChannel] {
        &self.layout.channels
    }

    pub fn channel(&self, id: &str) -> Option<&MeasurementChannel> {
        self.layout.channels.iter().find(|c| c.id == id)
    }

    pub fn channel_defs(&self) -> &[ChannelDef] {
        &self.layout.defs
    }

    /// Channel owning a row.
    pub fn row_channel(&self, row: usize) -> &MeasurementChannel {
        &self.layout.channels[self.layout.row_channel[row]]
    }

    pub fn masked_channels(&self) -> &BTreeSet<String> {
        &self.masked_channels
    }

    pub fn masked_zones(&self) -> &BTreeSet<String> {
        &self.masked_zones
    }

    pub fn is_channel_enabled(&self, id: &str) -> bool {
        self.channel(id)
            .is_some_and(|c| c.rows.iter().all(|r| self.enabled_rows.binary_search(r).is_ok()))
    }

    /// Sigma of every enabled row.
    pub fn sigmas(&self) -> DVector<f64> {
        DVector::from_iterator(self.m(), self.enabled_rows.iter().map(|r| self.row_channel(*r).sigma))
    }

    /// Linear coefficients of a row over the full window state.
    pub fn row_linear(&self, row: usize) -> DVector<f64> {
        self.layout.y.row(row).transpose()
    }

    /// Assemble the full measurement vector (every row, enabled or not).
    ///
    /// `prev` / `now` hold one value per channel definition, in definition
    /// order; `u_prev` / `u_now` are the network controls at the two samples.
    pub fn measurement_vector(
        &self,
        prev: &[f64],
        now: &[f64],
        u_prev: &DVector<f64>,
        u_now: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let l = &self.layout;
        check_len("channel values", l.defs.len(), prev.len())?;
        check_len("channel values", l.defs.len(), now.len())?;
        let mut z = &l.target_u_prev * u_prev + &l.target_u_now * u_now + &l.target_c;
        for (row, slot, f) in &l.target_quad_u {
            let u = if *slot == 0 { u_prev } else { u_now };
            z[*row] += u.dot(&(f * u));
        }
        for (k, (r0, r1)) in l.def_rows.iter().enumerate() {
            z[*r0] = prev[k];
            z[*r1] = now[k];
        }
        Ok(z)
    }

    /// Restrict a full-row vector to the enabled rows.
    pub fn select(&self, full: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.m(), self.enabled_rows.iter().map(|r| full[*r]))
    }

    fn check_window(&self, x: &DVector<f64>) -> Result<()> {
        check_len("window state", self.window_state_count(), x.len())
    }

    /// Predicted measurements `h(x)` for the enabled rows.
    pub fn eval_h(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_window(x)?;
        let l = &self.layout;
        let mut out = DVector::zeros(self.m());
        for (k, &r) in self.enabled_rows.iter().enumerate() {
            out[k] = l.y.row(r).transpose().dot(x) + l.c[r];
        }
        self.add_quadratic(x, &mut out, |f, x| x.dot(&(f * x)));
        Ok(out)
    }

    fn add_quadratic<F>(&self, x: &DVector<f64>, out: &mut DVector<f64>, term: F)
    where
        F: Fn(&DMatrix<f64>, &DVector<f64>) -> f64,
    {
        for (r, f) in &self.layout.quad {
            if let Ok(k) = self.enabled_rows.binary_search(r) {
                out[k] += term(f, x);
            }
        }
    }

    /// Jacobian `dh/dx` of the enabled rows over the full window state.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_window(x)?;
        let l = &self.layout;
        let mut hm = l.y.select_rows(self.enabled_rows.iter());
        for (r, f) in &l.quad {
            if let Ok(k) = self.enabled_rows.binary_search(r) {
                let g = f * x * 2.0;
                for j in 0..x.len() {
                    hm[(k, j)] += g[j];
                }
            }
        }
        Ok(hm)
    }

    /// Jacobian restricted to the active state columns.
    pub(crate) fn jacobian_active(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.jacobian(x)?.select_columns(self.active_states.iter()))
    }

    /// Cached normal-equation factorization for linear models.
    pub(crate) fn linear_factor(&self) -> Option<Arc<LinearFactor>> {
        self.factor
            .get_or_init(|| {
                if !self.is_linear() {
                    return None;
                }
                let hm = self
                    .layout
                    .y
                    .select_rows(self.enabled_rows.iter())
                    .select_columns(self.active_states.iter());
                LinearFactor::new(hm, &self.sigmas()).map(Arc::new)
            })
            .clone()
    }

    fn check_channel_ids<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<BTreeSet<String>> {
        let mut out = self.masked_channels.clone();
        for id in ids {
            if self.channel(id).is_none() {
                return Err(Error::UnknownReference(format!("channel {id}")));
            }
            out.insert(id.to_string());
        }
        Ok(out)
    }

    /// Disable channels; errors when the result is no longer observable.
    pub fn mask_channels<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<MeasurementModel> {
        let set = self.check_channel_ids(ids)?;
        if set == self.masked_channels {
            return Ok(self.clone());
        }
        Self::from_mask(self.layout.clone(), set, self.masked_zones.clone())
    }

    /// Remove a protection zone: its merging units' channels, its devices'
    /// equations and the KCL rows of nodes interior to it. Branch currents
    /// crossing the zone boundary stay in the boundary KCL rows as free
    /// injections.
    pub fn mask_zone(&self, network: &NetworkModel, zone_id: &str) -> Result<MeasurementModel> {
        if network.zone_index(zone_id).is_none() || !self.layout.zone_ids.iter().any(|z| z == zone_id) {
            return Err(Error::UnknownReference(format!("zone {zone_id}")));
        }
        let mut zones = self.masked_zones.clone();
        if !zones.insert(zone_id.to_string()) {
            return Ok(self.clone());
        }
        Self::from_mask(self.layout.clone(), self.masked_channels.clone(), zones)
    }

    /// Stack two sample states into a window state.
    pub fn window_state(&self, prev: &DVector<f64>, now: &DVector<f64>) -> DVector<f64> {
        let nx = self.layout.nx;
        let mut x = DVector::zeros(2 * nx);
        x.rows_mut(0, nx).copy_from(prev);
        x.rows_mut(nx, nx).copy_from(now);
        x
    }

    pub fn zone_id(&self, zone: usize) -> Option<&str> {
        self.layout.zone_ids.get(zone).map(String::as_str)
    }
}
