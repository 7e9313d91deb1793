//! Network assembly: global state ordering, KCL rows and protection zones.
//!
//! State ordering is fixed: every non-ground node-phase voltage in order of
//! first appearance over the device list, then each device's internal states
//! in device order. Equation rows follow the same layout: one KCL row per
//! node-phase, then every device's internal rows.

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::device::{check_len, DeviceModel, NodePhase, BASE_FREQUENCY_HZ};
use crate::error::{Error, Result};

/// A breaker-delimited group of devices monitored as one unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtectionZone {
    pub id: String,
    pub devices: Vec<String>,
    #[serde(default)]
    pub merging_units: Vec<String>,
    /// Filled during assembly.
    #[serde(skip)]
    pub boundary: Vec<NodePhase>,
}

impl ProtectionZone {
    pub fn new(id: impl Into<String>, devices: Vec<String>, merging_units: Vec<String>) -> Self {
        ProtectionZone {
            id: id.into(),
            devices,
            merging_units,
            boundary: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerUnitBases {
    pub v_base_kv: f64,
    pub s_base_mva: f64,
}

impl Default for PerUnitBases {
    fn default() -> Self {
        PerUnitBases {
            v_base_kv: 0.48,
            s_base_mva: 0.1,
        }
    }
}

/// What a global equation row represents.
#[derive(Debug, Clone, PartialEq)]
pub enum EquationRow {
    Kcl(NodePhase),
    Internal { device: usize, index: usize },
}

/// Quadratic terms of one global row.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticRow {
    pub row: usize,
    pub f_x: DMatrix<f64>,
    pub f_u: DMatrix<f64>,
}

/// Assembled global equations `Yx x + Yu u + D dx/dt + C + [quadratic] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkEquations {
    pub y_x: DMatrix<f64>,
    pub y_u: DMatrix<f64>,
    pub d_x: DMatrix<f64>,
    pub c: DVector<f64>,
    pub quadratic: Vec<QuadraticRow>,
    pub rows: Vec<EquationRow>,
}

impl NetworkEquations {
    pub fn is_differential(&self, row: usize) -> bool {
        self.d_x.row(row).iter().any(|v| *v != 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    devices: Vec<DeviceModel>,
    nodes: Vec<NodePhase>,
    node_pos: HashMap<NodePhase, usize>,
    device_pos: HashMap<String, usize>,
    internal_offset: Vec<usize>,
    control_offset: Vec<usize>,
    local_map: Vec<Vec<Option<usize>>>,
    zones: Vec<ProtectionZone>,
    device_zone: Vec<usize>,
    breakers: Vec<String>,
    state_count: usize,
    control_count: usize,
    equations: NetworkEquations,
    pub frequency_hz: f64,
    pub bases: PerUnitBases,
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut k = i;
        while self.0[k] != r {
            let next = self.0[k];
            self.0[k] = r;
            k = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

/// Assemble devices into a network with protection zones.
///
/// `breakers` names the buses where zones meet; every bus shared by devices
/// of two zones must carry a breaker.
pub fn assemble(devices: Vec<DeviceModel>, zones: Vec<ProtectionZone>, breakers: Vec<String>) -> Result<NetworkModel> {
    let mut device_pos = HashMap::new();
    for (k, dev) in devices.iter().enumerate() {
        dev.validate()?;
        if device_pos.insert(dev.name.clone(), k).is_some() {
            return Err(Error::DuplicateBinding(format!("device name {} used twice", dev.name)));
        }
        let mut seen = BTreeSet::new();
        for t in &dev.terminals {
            if !t.is_ground() && !seen.insert(t.clone()) {
                return Err(Error::DuplicateBinding(format!("{} binds {} twice", dev.name, t)));
            }
        }
    }

    let mut nodes = Vec::new();
    let mut node_pos = HashMap::new();
    for dev in &devices {
        for t in &dev.terminals {
            if !t.is_ground() && !node_pos.contains_key(t) {
                node_pos.insert(t.clone(), nodes.len());
                nodes.push(t.clone());
            }
        }
    }

    // Every node-phase needs a conductive path to ground (single-terminal
    // devices return through ground).
    let ground = nodes.len();
    let mut dsu = DisjointSet((0..=nodes.len()).collect());
    for dev in &devices {
        let ids: Vec<usize> = dev
            .terminals
            .iter()
            .map(|t| if t.is_ground() { ground } else { node_pos[t] })
            .collect();
        for w in ids.windows(2) {
            dsu.union(w[0], w[1]);
        }
        if ids.len() == 1 {
            dsu.union(ids[0], ground);
        }
    }
    for (k, n) in nodes.iter().enumerate() {
        if dsu.find(k) != dsu.find(ground) {
            return Err(Error::DanglingNode(n.to_string()));
        }
    }

    // Zones.
    let mut device_zone = vec![usize::MAX; devices.len()];
    for (z, zone) in zones.iter().enumerate() {
        if zone.devices.is_empty() {
            return Err(Error::ModelInvariant(format!("zone {} has no devices", zone.id)));
        }
        if zones[..z].iter().any(|o| o.id == zone.id) {
            return Err(Error::DuplicateBinding(format!("zone id {} used twice", zone.id)));
        }
        for name in &zone.devices {
            let k = *device_pos
                .get(name)
                .ok_or_else(|| Error::UnknownReference(format!("zone {} lists unknown device {name}", zone.id)))?;
            if device_zone[k] != usize::MAX {
                return Err(Error::DuplicateBinding(format!("device {name} assigned to two zones")));
            }
            device_zone[k] = z;
        }
    }
    if let Some(k) = device_zone.iter().position(|z| *z == usize::MAX) {
        return Err(Error::ModelInvariant(format!(
            "device {} belongs to no zone",
            devices[k].name
        )));
    }
    let node_names: BTreeSet<&str> = nodes.iter().map(|n| n.node.as_str()).collect();
    for b in &breakers {
        if !node_names.contains(b.as_str()) {
            return Err(Error::UnknownReference(format!("breaker at unknown bus {b}")));
        }
    }
    let mut bus_zones: HashMap<&str, BTreeSet<usize>> = HashMap::new();
    for (k, dev) in devices.iter().enumerate() {
        for t in dev.terminals.iter().filter(|t| !t.is_ground()) {
            bus_zones.entry(t.node.as_str()).or_default().insert(device_zone[k]);
        }
    }
    let mut zones = zones;
    for (bus, set) in &bus_zones {
        if set.len() > 1 && !breakers.iter().any(|b| b == bus) {
            return Err(Error::ModelInvariant(format!(
                "bus {bus} joins several zones but carries no breaker"
            )));
        }
    }
    for (z, zone) in zones.iter_mut().enumerate() {
        let mut boundary = BTreeSet::new();
        for (k, dev) in devices.iter().enumerate() {
            if device_zone[k] != z {
                continue;
            }
            for t in dev.terminals.iter().filter(|t| !t.is_ground()) {
                if bus_zones[t.node.as_str()].len() > 1 {
                    boundary.insert(t.clone());
                }
            }
        }
        zone.boundary = boundary.into_iter().collect();
    }

    // State layout.
    let mut internal_offset = Vec::with_capacity(devices.len());
    let mut control_offset = Vec::with_capacity(devices.len());
    let mut next_state = nodes.len();
    let mut next_control = 0;
    let mut local_map = Vec::with_capacity(devices.len());
    for dev in &devices {
        internal_offset.push(next_state);
        control_offset.push(next_control);
        let mut map: Vec<Option<usize>> = dev
            .terminals
            .iter()
            .map(|t| if t.is_ground() { None } else { Some(node_pos[t]) })
            .collect();
        map.extend((0..dev.internal_count).map(|k| Some(next_state + k)));
        local_map.push(map);
        next_state += dev.internal_count;
        next_control += dev.control_count();
    }
    let state_count = next_state;
    let control_count = next_control;

    let equations = build_equations(
        &devices,
        &nodes,
        &node_pos,
        &local_map,
        &control_offset,
        state_count,
        control_count,
    );

    Ok(NetworkModel {
        devices,
        nodes,
        node_pos,
        device_pos,
        internal_offset,
        control_offset,
        local_map,
        zones,
        device_zone,
        breakers,
        state_count,
        control_count,
        equations,
        frequency_hz: BASE_FREQUENCY_HZ,
        bases: PerUnitBases::default(),
    })
}

fn build_equations(
    devices: &[DeviceModel],
    nodes: &[NodePhase],
    node_pos: &HashMap<NodePhase, usize>,
    local_map: &[Vec<Option<usize>>],
    control_offset: &[usize],
    n: usize,
    nu: usize,
) -> NetworkEquations {
    let mut y_x = DMatrix::zeros(n, n);
    let mut y_u = DMatrix::zeros(n, nu);
    let mut d_x = DMatrix::zeros(n, n);
    let mut c = DVector::zeros(n);
    let mut quadratic = Vec::new();
    let mut rows: Vec<EquationRow> = nodes.iter().cloned().map(EquationRow::Kcl).collect();

    let mut row = nodes.len();
    for (k, dev) in devices.iter().enumerate() {
        let map = &local_map[k];
        let uo = control_offset[k];
        // Through currents add into the KCL row of their node.
        for (t, term) in dev.terminals.iter().enumerate() {
            if term.is_ground() {
                continue;
            }
            let r = node_pos[term];
            for (l, g) in map.iter().enumerate() {
                if let Some(g) = g {
                    y_x[(r, *g)] += dev.through.y_x[(t, l)];
                    d_x[(r, *g)] += dev.through.d_x[(t, l)];
                }
            }
            for j in 0..dev.control_count() {
                y_u[(r, uo + j)] += dev.through.y_u[(t, j)];
            }
            c[r] += dev.through.c[t];
        }
        for i in 0..dev.internal.rows() {
            for (l, g) in map.iter().enumerate() {
                if let Some(g) = g {
                    y_x[(row, *g)] += dev.internal.y_x[(i, l)];
                    d_x[(row, *g)] += dev.internal.d_x[(i, l)];
                }
            }
            for j in 0..dev.control_count() {
                y_u[(row, uo + j)] += dev.internal.y_u[(i, j)];
            }
            c[row] += dev.internal.c[i];
            rows.push(EquationRow::Internal { device: k, index: i });
            row += 1;
        }
        let q = &dev.quadratic;
        for i in 0..q.rows() {
            let mut f_x = DMatrix::zeros(n, n);
            let mut f_u = DMatrix::zeros(nu, nu);
            for (l, g) in map.iter().enumerate() {
                if let Some(g) = g {
                    y_x[(row, *g)] += q.y_x[(i, l)];
                    for (l2, g2) in map.iter().enumerate() {
                        if let Some(g2) = g2 {
                            f_x[(*g, *g2)] += q.f_x[i][(l, l2)];
                        }
                    }
                }
            }
            for j in 0..dev.control_count() {
                y_u[(row, uo + j)] += q.y_u[(i, j)];
                for j2 in 0..dev.control_count() {
                    f_u[(uo + j, uo + j2)] += q.f_u[i][(j, j2)];
                }
            }
            c[row] += q.c[i];
            quadratic.push(QuadraticRow { row, f_x, f_u });
            rows.push(EquationRow::Internal {
                device: k,
                index: dev.internal.rows() + i,
            });
            row += 1;
        }
    }
    NetworkEquations {
        y_x,
        y_u,
        d_x,
        c,
        quadratic,
        rows,
    }
}

impl NetworkModel {
    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn control_count(&self) -> usize {
        self.control_count
    }

    pub fn devices(&self) -> &[DeviceModel] {
        &self.devices
    }

    pub fn nodes(&self) -> &[NodePhase] {
        &self.nodes
    }

    pub fn zones(&self) -> &[ProtectionZone] {
        &self.zones
    }

    pub fn breakers(&self) -> &[String] {
        &self.breakers
    }

    pub fn equations(&self) -> &NetworkEquations {
        &self.equations
    }

    pub fn is_linear(&self) -> bool {
        self.equations.quadratic.is_empty()
    }

    pub fn node_index(&self, node: &NodePhase) -> Option<usize> {
        self.node_pos.get(node).copied()
    }

    pub fn device_index(&self, name: &str) -> Option<usize> {
        self.device_pos.get(name).copied()
    }

    pub fn device(&self, name: &str) -> Option<&DeviceModel> {
        self.device_index(name).map(|k| &self.devices[k])
    }

    /// Global index of a device's `k`-th internal state.
    pub fn internal_index(&self, device: &str, k: usize) -> Option<usize> {
        let d = self.device_index(device)?;
        (k < self.devices[d].internal_count).then(|| self.internal_offset[d] + k)
    }

    /// Global state index for each local state of a device (`None` for ground).
    pub fn local_map(&self, device: usize) -> &[Option<usize>] {
        &self.local_map[device]
    }

    pub fn zone_index(&self, id: &str) -> Option<usize> {
        self.zones.iter().position(|z| z.id == id)
    }

    pub fn device_zone(&self, device: usize) -> usize {
        self.device_zone[device]
    }

    /// Zone owning a merging unit, if any.
    pub fn zone_of_merging_unit(&self, mu: &str) -> Option<usize> {
        self.zones.iter().position(|z| z.merging_units.iter().any(|m| m == mu))
    }

    /// Node-phases touched only by devices of the given zone.
    pub fn zone_interior_nodes(&self, zone: usize) -> Vec<NodePhase> {
        let mut touching: HashMap<&NodePhase, BTreeSet<usize>> = HashMap::new();
        for (k, dev) in self.devices.iter().enumerate() {
            for t in dev.terminals.iter().filter(|t| !t.is_ground()) {
                touching.entry(t).or_default().insert(self.device_zone[k]);
            }
        }
        self.nodes
            .iter()
            .filter(|n| {
                let set = &touching[n];
                set.len() == 1 && set.contains(&zone)
            })
            .cloned()
            .collect()
    }

    /// Control vector at time `t`, concatenated in device order.
    pub fn controls_at(&self, t: f64) -> DVector<f64> {
        let mut u = DVector::zeros(self.control_count);
        for (k, dev) in self.devices.iter().enumerate() {
            for (j, sig) in dev.controls.iter().enumerate() {
                u[self.control_offset[k] + j] = sig.value(t);
            }
        }
        u
    }

    /// Control phasors `amplitude * exp(j*angle)` for cosine controls.
    pub fn control_phasors(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, 0.0); self.control_count];
        for (k, dev) in self.devices.iter().enumerate() {
            for (j, sig) in dev.controls.iter().enumerate() {
                out[self.control_offset[k] + j] = match *sig {
                    super::device::ControlSignal::Cosine {
                        amplitude, phase_angle, ..
                    } => (amplitude, phase_angle),
                    super::device::ControlSignal::Constant(_) => (0.0, 0.0),
                };
            }
        }
        out
    }

    /// Stacked residuals of every global row: KCL rows, then device rows.
    pub fn evaluate_model(&self, x: &DVector<f64>, u: &DVector<f64>, xdot: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("network state", self.state_count, x.len())?;
        check_len("network control", self.control_count, u.len())?;
        check_len("network derivative", self.state_count, xdot.len())?;
        let eq = &self.equations;
        let mut r = &eq.y_x * x + &eq.y_u * u + &eq.d_x * xdot + &eq.c;
        for q in &eq.quadratic {
            r[q.row] += x.dot(&(&q.f_x * x)) + u.dot(&(&q.f_u * u));
        }
        Ok(r)
    }

    /// A new network with extra devices appended and assigned to zones.
    ///
    /// Existing states keep their indices; the extra devices' internal
    /// states are appended after them.
    pub fn with_extra_devices(&self, extra: Vec<(DeviceModel, String)>) -> Result<NetworkModel> {
        let mut devices = self.devices.clone();
        let mut zones = self.zones.clone();
        for (dev, zone) in extra {
            let z = zones
                .iter_mut()
                .find(|z| z.id == zone)
                .ok_or_else(|| Error::UnknownReference(format!("zone {zone}")))?;
            z.devices.push(dev.name.clone());
            devices.push(dev);
        }
        let mut net = assemble(devices, zones, self.breakers.clone())?;
        net.frequency_hz = self.frequency_hz;
        net.bases = self.bases;
        Ok(net)
    }

    /// Zone containing a node-phase, preferring zones where it is interior.
    pub fn zone_of_node(&self, node: &NodePhase) -> Option<usize> {
        let mut candidates = BTreeSet::new();
        for (k, dev) in self.devices.iter().enumerate() {
            if dev.terminals.contains(node) {
                candidates.insert(self.device_zone[k]);
            }
        }
        candidates
            .iter()
            .copied()
            .find(|z| self.zone_interior_nodes(*z).contains(node))
            .or_else(|| candidates.iter().next().copied())
    }
}
