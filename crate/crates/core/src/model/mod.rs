//! Device and network models.

mod device;
mod network;

pub(crate) use device::check_len;

pub use device::{
    make_fault_branch, make_ideal_source, make_rl_branch, Companion, ControlSignal, DeviceKind, DeviceModel,
    LinearBlock, NodePhase, Phase, QuadraticBlock, BASE_FREQUENCY_HZ, GROUND,
};
pub use network::{assemble, EquationRow, NetworkEquations, NetworkModel, PerUnitBases, ProtectionZone, QuadraticRow};
