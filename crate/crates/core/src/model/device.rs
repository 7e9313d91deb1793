//! Single-device models in the standard state/control syntax.
//!
//! Every device is described by the same three equation blocks:
//!
//! ```text
//! i(t) = Y_eqx1 x + Y_equ1 u + D_eqxd1 dx/dt + C_eqc1          (through currents)
//!    0 = Y_eqx2 x + Y_equ2 u + D_eqxd2 dx/dt + C_eqc2          (linear internal)
//!    0 = Y_eqx3 x + Y_equ3 u + [x' F_x^i x] + [u' F_u^i u] + C_eqc3  (quadratic internal)
//! ```
//!
//! The local state vector lists terminal voltages first, then internal
//! states. `D_eqxd2` acts on the full local state; columns of states without
//! a derivative term are zero.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// System frequency used by every source.
pub const BASE_FREQUENCY_HZ: f64 = 60.0;

/// Node name reserved for the ground reference.
pub const GROUND: &str = "gnd";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    A,
    B,
    C,
    N,
}

impl Phase {
    pub const ABC: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    /// Nominal angle offset of the phase in a positive-sequence set.
    pub fn angle_offset(self) -> f64 {
        use std::f64::consts::PI;
        match self {
            Phase::A | Phase::N => 0.0,
            Phase::B => -2.0 * PI / 3.0,
            Phase::C => 2.0 * PI / 3.0,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::A => "A",
            Phase::B => "B",
            Phase::C => "C",
            Phase::N => "N",
        };
        f.write_str(s)
    }
}

/// One phase conductor of a bus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodePhase {
    pub node: String,
    pub phase: Phase,
}

impl NodePhase {
    pub fn new(node: impl Into<String>, phase: Phase) -> Self {
        NodePhase {
            node: node.into(),
            phase,
        }
    }

    pub fn ground() -> Self {
        NodePhase::new(GROUND, Phase::N)
    }

    pub fn is_ground(&self) -> bool {
        self.node == GROUND
    }
}

impl fmt::Display for NodePhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.node, self.phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviceKind {
    Source,
    Branch,
    Fault,
}

/// Time function driving one control input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ControlSignal {
    Cosine {
        amplitude: f64,
        phase_angle: f64,
        frequency_hz: f64,
    },
    Constant(f64),
}

impl ControlSignal {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            ControlSignal::Cosine {
                amplitude,
                phase_angle,
                frequency_hz,
            } => amplitude * (2.0 * std::f64::consts::PI * frequency_hz * t + phase_angle).cos(),
            ControlSignal::Constant(v) => v,
        }
    }
}

/// Linear equation block `Y_x x + Y_u u + D dx/dt + C`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBlock {
    pub y_x: DMatrix<f64>,
    pub y_u: DMatrix<f64>,
    pub d_x: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl LinearBlock {
    pub fn zeros(rows: usize, states: usize, controls: usize) -> Self {
        LinearBlock {
            y_x: DMatrix::zeros(rows, states),
            y_u: DMatrix::zeros(rows, controls),
            d_x: DMatrix::zeros(rows, states),
            c: DVector::zeros(rows),
        }
    }

    pub fn rows(&self) -> usize {
        self.y_x.nrows()
    }

    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>, xdot: &DVector<f64>) -> DVector<f64> {
        &self.y_x * x + &self.y_u * u + &self.d_x * xdot + &self.c
    }
}

/// Quadratic equation block: linear part plus one `x' F x` / `u' F u` term per row.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticBlock {
    pub y_x: DMatrix<f64>,
    pub y_u: DMatrix<f64>,
    pub f_x: Vec<DMatrix<f64>>,
    pub f_u: Vec<DMatrix<f64>>,
    pub c: DVector<f64>,
}

impl QuadraticBlock {
    pub fn zeros(rows: usize, states: usize, controls: usize) -> Self {
        QuadraticBlock {
            y_x: DMatrix::zeros(rows, states),
            y_u: DMatrix::zeros(rows, controls),
            f_x: vec![DMatrix::zeros(states, states); rows],
            f_u: vec![DMatrix::zeros(controls, controls); rows],
            c: DVector::zeros(rows),
        }
    }

    pub fn rows(&self) -> usize {
        self.y_x.nrows()
    }

    /// Replace every quadratic matrix by its symmetric part.
    pub fn symmetrize(&mut self) {
        for f in self.f_x.iter_mut().chain(self.f_u.iter_mut()) {
            *f = (&*f + f.transpose()) * 0.5;
        }
    }

    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.y_x * x + &self.y_u * u + &self.c;
        for (k, v) in out.iter_mut().enumerate() {
            *v += x.dot(&(&self.f_x[k] * x)) + u.dot(&(&self.f_u[k] * u));
        }
        out
    }
}

/// Coefficient matrices of one device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel {
    pub name: String,
    pub kind: DeviceKind,
    pub terminals: Vec<NodePhase>,
    pub internal_count: usize,
    pub controls: Vec<ControlSignal>,
    pub through: LinearBlock,
    pub internal: LinearBlock,
    pub quadratic: QuadraticBlock,
}

/// Trapezoidal companion coefficients of the internal rows.
///
/// Differential rows become `now * x(t) + prev * x(t-h) + ... = 0`; algebraic
/// rows keep `now = Y_x` and a zero `prev`.
#[derive(Debug, Clone, PartialEq)]
pub struct Companion {
    pub now: DMatrix<f64>,
    pub prev: DMatrix<f64>,
    pub differential: Vec<bool>,
}

impl DeviceModel {
    pub fn state_count(&self) -> usize {
        self.terminals.len() + self.internal_count
    }

    pub fn control_count(&self) -> usize {
        self.controls.len()
    }

    pub fn is_linear(&self) -> bool {
        self.quadratic.rows() == 0
    }

    /// Check the block dimensions and row partition against the state count.
    pub fn validate(&self) -> Result<()> {
        let n = self.state_count();
        let nu = self.control_count();
        let fail = |msg: String| Err(Error::ModelInvariant(format!("{}: {msg}", self.name)));

        if self.through.rows() != self.terminals.len() {
            return fail(format!(
                "{} through-current rows for {} terminals",
                self.through.rows(),
                self.terminals.len()
            ));
        }
        if self.internal.rows() + self.quadratic.rows() != self.internal_count {
            return fail(format!(
                "{} internal rows for {} internal states",
                self.internal.rows() + self.quadratic.rows(),
                self.internal_count
            ));
        }
        for (label, block) in [("through", &self.through), ("internal", &self.internal)] {
            if block.y_x.ncols() != n || block.d_x.ncols() != n || block.d_x.nrows() != block.rows() {
                return fail(format!("{label} block state dimension"));
            }
            if block.y_u.ncols() != nu || block.y_u.nrows() != block.rows() || block.c.len() != block.rows() {
                return fail(format!("{label} block control/constant dimension"));
            }
        }
        let q = &self.quadratic;
        if q.y_x.ncols() != n || q.y_u.ncols() != nu || q.y_u.nrows() != q.rows() || q.c.len() != q.rows() {
            return fail("quadratic block dimension".into());
        }
        if q.f_x.len() != q.rows() || q.f_u.len() != q.rows() {
            return fail("one quadratic matrix per row required".into());
        }
        for f in &q.f_x {
            if f.shape() != (n, n) || !is_symmetric(f) {
                return fail("state quadratic matrix must be symmetric n x n".into());
            }
        }
        for f in &q.f_u {
            if f.shape() != (nu, nu) || !is_symmetric(f) {
                return fail("control quadratic matrix must be symmetric".into());
            }
        }
        Ok(())
    }

    /// Evaluate all three blocks at a local (x, u, dx/dt).
    ///
    /// Returns the through currents and the stacked internal residuals
    /// (linear rows first, then quadratic rows).
    pub fn evaluate(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        xdot: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        check_len("device state", self.state_count(), x.len())?;
        check_len("device control", self.control_count(), u.len())?;
        check_len("device derivative", self.state_count(), xdot.len())?;
        let currents = self.through.eval(x, u, xdot);
        let lin = self.internal.eval(x, u, xdot);
        let quad = self.quadratic.eval(x, u);
        let residual = DVector::from_iterator(lin.len() + quad.len(), lin.iter().chain(quad.iter()).copied());
        Ok((currents, residual))
    }

    /// Trapezoidal discretization of the linear internal rows with step `h`.
    pub fn trapezoidal_companion(&self, h: f64) -> Companion {
        let block = &self.internal;
        let mut now = block.y_x.clone();
        let mut prev = DMatrix::zeros(block.rows(), self.state_count());
        let mut differential = Vec::with_capacity(block.rows());
        for r in 0..block.rows() {
            let dyn_row = block.d_x.row(r).iter().any(|v| *v != 0.0);
            differential.push(dyn_row);
            if dyn_row {
                for c in 0..self.state_count() {
                    let d = block.d_x[(r, c)];
                    now[(r, c)] = block.y_x[(r, c)] + 2.0 * d / h;
                    prev[(r, c)] = block.y_x[(r, c)] - 2.0 * d / h;
                }
            }
        }
        Companion {
            now,
            prev,
            differential,
        }
    }
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    m.is_square() && (m - m.transpose()).iter().all(|v| v.abs() <= 1e-14)
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { what, expected, got });
    }
    Ok(())
}

/// Series R-L branch `v_from - v_to = R i + L di/dt`.
///
/// Local state: `[v_from, v_to, i]`, with `i` flowing from `from` to `to`.
pub fn make_rl_branch(name: impl Into<String>, r: f64, l: f64, from: NodePhase, to: NodePhase) -> Result<DeviceModel> {
    let name = name.into();
    if !(r.is_finite() && l.is_finite()) || r < 0.0 || l < 0.0 {
        return Err(Error::InvalidDevice(format!(
            "{name}: R and L must be finite and non-negative"
        )));
    }
    if r == 0.0 && l == 0.0 {
        return Err(Error::InvalidDevice(format!(
            "{name}: zero-impedance branch is singular"
        )));
    }
    if from == to {
        return Err(Error::DuplicateBinding(format!(
            "{name}: both terminals bound to {from}"
        )));
    }
    let mut through = LinearBlock::zeros(2, 3, 0);
    through.y_x[(0, 2)] = 1.0;
    through.y_x[(1, 2)] = -1.0;
    let mut internal = LinearBlock::zeros(1, 3, 0);
    internal.y_x[(0, 0)] = 1.0;
    internal.y_x[(0, 1)] = -1.0;
    internal.y_x[(0, 2)] = -r;
    internal.d_x[(0, 2)] = -l;
    Ok(DeviceModel {
        name,
        kind: DeviceKind::Branch,
        terminals: vec![from, to],
        internal_count: 1,
        controls: Vec::new(),
        through,
        internal,
        quadratic: QuadraticBlock::zeros(0, 3, 0),
    })
}

/// Ideal voltage source pinning `node` to `amplitude * cos(2*pi*60*t + phase_angle)`.
///
/// Local state: `[v, i_s]` where `i_s` is injected into the node; the return
/// path is the ground reference. The cosine enters through the single control.
pub fn make_ideal_source(
    name: impl Into<String>,
    amplitude: f64,
    phase_angle: f64,
    node: NodePhase,
) -> Result<DeviceModel> {
    let name = name.into();
    if !(amplitude > 0.0 && amplitude.is_finite()) || !phase_angle.is_finite() {
        return Err(Error::InvalidDevice(format!("{name}: amplitude must be positive")));
    }
    if node.is_ground() {
        return Err(Error::InvalidDevice(format!(
            "{name}: source cannot pin the ground node"
        )));
    }
    let mut through = LinearBlock::zeros(1, 2, 1);
    through.y_x[(0, 1)] = -1.0;
    let mut internal = LinearBlock::zeros(1, 2, 1);
    internal.y_x[(0, 0)] = 1.0;
    internal.y_u[(0, 0)] = -1.0;
    Ok(DeviceModel {
        name,
        kind: DeviceKind::Source,
        terminals: vec![node],
        internal_count: 1,
        controls: vec![ControlSignal::Cosine {
            amplitude,
            phase_angle,
            frequency_hz: BASE_FREQUENCY_HZ,
        }],
        through,
        internal,
        quadratic: QuadraticBlock::zeros(0, 2, 1),
    })
}

/// Resistive phase-to-ground branch used to realize a single line-to-ground fault.
pub fn make_fault_branch(name: impl Into<String>, node: NodePhase, r_f: f64) -> Result<DeviceModel> {
    let name = name.into();
    if !(r_f > 0.0 && r_f.is_finite()) {
        return Err(Error::InvalidDevice(format!(
            "{name}: fault resistance must be positive and finite"
        )));
    }
    let mut dev = make_rl_branch(name, r_f, 0.0, node, NodePhase::ground())?;
    dev.kind = DeviceKind::Fault;
    Ok(dev)
}
