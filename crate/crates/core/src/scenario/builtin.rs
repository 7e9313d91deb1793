//! Built-in test network and case studies.
//!
//! ```text
//!   s1 --grid-- b1 --cable1-- m1 --cable2-- b2 --pv-- s2
//!   (src_grid)  |             |             |        (src_pv)
//!               |            tap           load
//!   zone z1     |  zone z2 (cable, faults at m1)  | z3 load | z4 pv
//! ```
//!
//! Each merging unit has three phase currents, a neutral (derived) current
//! and three bus voltages. The cable zone is metered at both ends
//! (`mu_cable` at b1, `mu_cable_r` at b2); every other zone has one unit.
//! Breakers sit at `b1` and `b2`. The tap at the cable midpoint is a light
//! resistive load.

use std::f64::consts::PI;

use crate::decision::DecisionConfig;
use crate::hypothesis::ThresholdConfig;
use crate::measurement::{ChannelDef, ChannelKind, Quantity};
use crate::model::{NodePhase, PerUnitBases, Phase, ProtectionZone, BASE_FREQUENCY_HZ};
use crate::sim::{Event, InitialCondition};

use super::config::{DeviceSpec, NetworkConfig, ScenarioConfig};

/// Default simulated measurement noise (per-unit); below the declared
/// channel sigma so healthy windows sit well above the threshold.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.001;
pub const DEFAULT_SEED: u64 = 20240;
pub const FAULT_NODE: &str = "m1";
pub const FAULT_RESISTANCE: f64 = 0.01;

const W: f64 = 2.0 * PI * BASE_FREQUENCY_HZ;

fn np(node: &str, p: Phase) -> NodePhase {
    NodePhase::new(node, p)
}

fn tag(p: Phase) -> &'static str {
    match p {
        Phase::A => "a",
        Phase::B => "b",
        Phase::C => "c",
        Phase::N => "n",
    }
}

/// Network description of the built-in four-zone feeder.
pub fn network() -> NetworkConfig {
    let mut devices = Vec::new();
    let mut zone_devs: [Vec<String>; 4] = Default::default();
    for p in Phase::ABC {
        let t = tag(p);
        let mut add = |zone: usize, d: DeviceSpec| {
            let name = match &d {
                DeviceSpec::Source { name, .. } | DeviceSpec::RlBranch { name, .. } | DeviceSpec::Load { name, .. } => {
                    name.clone()
                }
            };
            zone_devs[zone].push(name);
            devices.push(d);
        };
        add(
            0,
            DeviceSpec::Source {
                name: format!("src_grid_{t}"),
                node: np("s1", p),
                amplitude: 1.0,
                phase_angle: p.angle_offset(),
            },
        );
        add(
            0,
            DeviceSpec::RlBranch {
                name: format!("grid_{t}"),
                from: np("s1", p),
                to: np("b1", p),
                r: 0.01,
                l: 0.05 / W,
            },
        );
        add(
            1,
            DeviceSpec::RlBranch {
                name: format!("cable1_{t}"),
                from: np("b1", p),
                to: np("m1", p),
                r: 0.02,
                l: 0.04 / W,
            },
        );
        add(
            1,
            DeviceSpec::RlBranch {
                name: format!("cable2_{t}"),
                from: np("m1", p),
                to: np("b2", p),
                r: 0.02,
                l: 0.04 / W,
            },
        );
        add(
            1,
            DeviceSpec::Load {
                name: format!("tap_{t}"),
                node: np("m1", p),
                r: 20.0,
                l: 0.0,
            },
        );
        add(
            2,
            DeviceSpec::Load {
                name: format!("load_{t}"),
                node: np("b2", p),
                r: 1.0,
                l: 0.0,
            },
        );
        add(
            3,
            DeviceSpec::Source {
                name: format!("src_pv_{t}"),
                node: np("s2", p),
                amplitude: 1.0,
                phase_angle: p.angle_offset() + 0.05,
            },
        );
        add(
            3,
            DeviceSpec::RlBranch {
                name: format!("pv_{t}"),
                from: np("s2", p),
                to: np("b2", p),
                r: 0.05,
                l: 0.1 / W,
            },
        );
    }
    let ids = ["z1", "z2", "z3", "z4"];
    let mus: [&[&str]; 4] = [&["mu_grid"], &["mu_cable", "mu_cable_r"], &["mu_load"], &["mu_pv"]];
    let zones = zone_devs
        .into_iter()
        .enumerate()
        .map(|(k, devs)| ProtectionZone::new(ids[k], devs, mus[k].iter().map(|m| m.to_string()).collect()))
        .collect();
    NetworkConfig {
        frequency_hz: BASE_FREQUENCY_HZ,
        bases: PerUnitBases::default(),
        devices,
        zones,
        breakers: vec!["b1".into(), "b2".into()],
    }
}

/// Four currents and three voltages per merging unit.
pub fn channels() -> Vec<ChannelDef> {
    let units = [
        ("mu_grid", "grid", "b1"),
        ("mu_cable", "cable1", "b1"),
        ("mu_cable_r", "cable2", "b2"),
        ("mu_load", "load", "b2"),
        ("mu_pv", "pv", "b2"),
    ];
    let mut out = Vec::new();
    for (mu, dev, bus) in units {
        for p in Phase::ABC {
            out.push(ChannelDef::new(
                format!("{mu}.i{}", tag(p)),
                mu,
                ChannelKind::ActualCurrent,
                Quantity::Current(format!("{dev}_{}", tag(p))),
            ));
        }
        out.push(ChannelDef::new(
            format!("{mu}.in"),
            mu,
            ChannelKind::Derived,
            Quantity::CurrentSum(Phase::ABC.iter().map(|p| format!("{dev}_{}", tag(*p))).collect()),
        ));
        for p in Phase::ABC {
            out.push(ChannelDef::new(
                format!("{mu}.v{}", tag(p)),
                mu,
                ChannelKind::ActualVoltage,
                Quantity::Voltage(np(bus, p)),
            ));
        }
    }
    out
}

pub struct CaseInfo {
    pub name: &'static str,
    pub description: &'static str,
}

pub const CASES: [CaseInfo; 4] = [
    CaseInfo {
        name: "case1",
        description: "CT ratio raised to 3:1 on mu_cable phase A current, 2-4 s",
    },
    CaseInfo {
        name: "case2",
        description: "single line-to-ground fault, phase A at the cable midpoint, 2-4 s",
    },
    CaseInfo {
        name: "case3",
        description: "simultaneous 3:1 CT attack on mu_load phase A and SLG fault at the cable midpoint, 2-4 s",
    },
    CaseInfo {
        name: "case4",
        description:
            "CT ratio cut to 20% on mu_cable phase A from 2 s to 4 s; SLG fault at the cable midpoint 2.55-2.8 s",
    },
];

pub fn list_cases() -> &'static [CaseInfo] {
    &CASES
}

pub fn attack(channel: &str, factor: f64, start: f64, end: f64) -> Event {
    Event::CtAttack {
        start,
        end,
        channels: vec![channel.to_string()],
        factor,
    }
}

pub fn fault(phase: Phase, start: f64, end: f64) -> Event {
    Event::SlgFault {
        start,
        end,
        node: np(FAULT_NODE, phase),
        resistance: FAULT_RESISTANCE,
    }
}

/// Scenario with the built-in network and a given event list.
pub fn scenario(name: &str, description: &str, events: Vec<Event>, duration: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        description: description.to_string(),
        network: network(),
        channels: channels(),
        events,
        duration,
        noise_sigma: DEFAULT_NOISE_SIGMA,
        seed: DEFAULT_SEED,
        initial: InitialCondition::SteadyState,
        thresholds: ThresholdConfig::default(),
        decision: DecisionConfig::default(),
        stride: 1,
        output_dir: None,
        strict: false,
        expectations: None,
    }
}

/// Built-in case study by name.
pub fn case(name: &str) -> Option<ScenarioConfig> {
    let info = CASES.iter().find(|c| c.name == name)?;
    let events = match name {
        "case1" => vec![attack("mu_cable.ia", 3.0, 2.0, 4.0)],
        "case2" => vec![fault(Phase::A, 2.0, 4.0)],
        "case3" => vec![attack("mu_load.ia", 3.0, 2.0, 4.0), fault(Phase::A, 2.0, 4.0)],
        "case4" => vec![attack("mu_cable.ia", 0.2, 2.0, 4.0), fault(Phase::A, 2.55, 2.8)],
        _ => return None,
    };
    Some(scenario(info.name, info.description, events, 5.0))
}
